use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seqanm::bounds::{sequential_bound, universal_bound};
use seqanm_harness::config::ExperimentConfig;
use seqanm_harness::experiment::{run_sweep, run_trial, SweepTable};
use seqanm_harness::output::{fmt_f64, write_csv, write_outputs};
use seqanm_harness::{HarnessError, SweepAxis};

#[derive(Parser, Debug)]
#[command(name = "seqanm", version, about = "Monte Carlo runner for the sequential atomic-norm channel estimator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single seeded trial.
    Trial {
        #[command(flatten)]
        io: Io,
        #[arg(long = "trial-index")]
        trial_index: usize,
        #[arg(long = "sweep-index", default_value_t = 0)]
        sweep_index: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep the pilot count; sweep values are `Np`.
    SweepPilots {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep the path count; sweep values are `L`.
    SweepPaths {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the closed-form MSE bounds.
    Bounds {
        #[arg(long = "L")]
        l: usize,
        #[arg(long)]
        sigma2: f64,
        #[arg(long = "Mp")]
        mp: usize,
        #[arg(long = "Np")]
        np: usize,
        /// Array size for the detailed sequential bound; defaults to `Mp`.
        #[arg(long = "M")]
        m: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Io {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path; a `.json` sidecar is written next to it. Without it
    /// the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long = "Mp")]
    mp: Option<String>,
    #[arg(long = "Np")]
    np: Option<String>,
    #[arg(long = "L")]
    l: Option<String>,
    #[arg(long)]
    sigma2: Option<String>,
    #[arg(long = "delay_max")]
    delay_max: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long = "master_seed")]
    master_seed: Option<String>,
    #[arg(long = "sweep_values")]
    sweep_values: Option<String>,
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    timing: Option<String>,
    #[arg(long)]
    crlb: Option<String>,
    #[arg(long = "paper_scale")]
    paper_scale: Option<String>,
    #[arg(long = "sdp.tol")]
    sdp_tol: Option<String>,
    #[arg(long = "sdp.max_iter")]
    sdp_max_iter: Option<String>,
    #[arg(long = "sdp.rho")]
    sdp_rho: Option<String>,
    #[arg(long = "bpdn.grid_aoa")]
    bpdn_grid_aoa: Option<String>,
    #[arg(long = "bpdn.grid_delay")]
    bpdn_grid_delay: Option<String>,
    #[arg(long = "bpdn.epsilon_scale")]
    bpdn_epsilon_scale: Option<String>,
}

impl Overrides {
    fn entries(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("M", &self.m),
            ("N", &self.n),
            ("Mp", &self.mp),
            ("Np", &self.np),
            ("L", &self.l),
            ("sigma2", &self.sigma2),
            ("delay_max", &self.delay_max),
            ("trials", &self.trials),
            ("master_seed", &self.master_seed),
            ("sweep_values", &self.sweep_values),
            ("estimators", &self.estimators),
            ("timing", &self.timing),
            ("crlb", &self.crlb),
            ("paper_scale", &self.paper_scale),
            ("sdp.tol", &self.sdp_tol),
            ("sdp.max_iter", &self.sdp_max_iter),
            ("sdp.rho", &self.sdp_rho),
            ("bpdn.grid_aoa", &self.bpdn_grid_aoa),
            ("bpdn.grid_delay", &self.bpdn_grid_delay),
            ("bpdn.epsilon_scale", &self.bpdn_epsilon_scale),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn load(io: &Io, overrides: &Overrides, axis: Option<SweepAxis>) -> Result<ExperimentConfig, HarnessError> {
    let mut entries = match &io.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            seqanm_harness::config::parse_entries(&text)?
        }
        None => BTreeMap::new(),
    };
    entries.extend(overrides.entries());
    if let Some(axis) = axis {
        entries.insert("sweep".to_string(), axis.name().to_string());
    }
    ExperimentConfig::from_entries(entries)
}

fn print_summary(table: &SweepTable) {
    let mut err = std::io::stderr().lock();
    for p in &table.points {
        for s in &p.summaries {
            let _ = writeln!(
                err,
                "{}={} {:<8} mean {:.4e} median {:.4e} (universal {:.4e}, sequential {:.4e}) failures {}",
                match table.axis {
                    SweepAxis::Pilots => "Np",
                    SweepAxis::Paths => "L",
                },
                p.value,
                s.estimator.name(),
                s.mean,
                s.median,
                p.bounds.universal,
                p.bounds.sequential_approx,
                s.failures,
            );
        }
    }
    if table.partial {
        let _ = writeln!(err, "warning: some estimator runs failed; see the sidecar for details");
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Trial {
            io,
            trial_index,
            sweep_index,
            overrides,
        } => {
            let cfg = load(&io, &overrides, None)?;
            let t = run_trial(&cfg, sweep_index, trial_index)?;
            emit(&io, &cfg, None, &[&t])
        }
        Command::SweepPilots { io, overrides } => sweep(&io, &overrides, SweepAxis::Pilots),
        Command::SweepPaths { io, overrides } => sweep(&io, &overrides, SweepAxis::Paths),
        Command::Bounds { l, sigma2, mp, np, m } => {
            let universal = universal_bound(l, sigma2, mp, np)?;
            let seq = sequential_bound(l, sigma2, m.unwrap_or(mp), mp, np)?;
            println!("universal_bound {}", fmt_f64(universal));
            println!("sequential_bound_detailed {}", fmt_f64(seq.detailed));
            println!("sequential_bound_approx {}", fmt_f64(seq.approx));
            Ok(())
        }
    }
}

fn sweep(io: &Io, overrides: &Overrides, axis: SweepAxis) -> Result<(), HarnessError> {
    let cfg = load(io, overrides, Some(axis))?;
    let table = run_sweep(&cfg)?;
    print_summary(&table);
    let trials: Vec<_> = table.points.iter().flat_map(|p| p.trials.iter()).collect();
    emit(io, &cfg, Some(&table), &trials)
}

fn emit(
    io: &Io,
    cfg: &ExperimentConfig,
    table: Option<&SweepTable>,
    trials: &[&seqanm_harness::TrialResult],
) -> Result<(), HarnessError> {
    match &io.out {
        Some(path) => write_outputs(path, cfg, table, trials),
        None => {
            let mut out = std::io::stdout().lock();
            write_csv(&mut out, trials, cfg).map_err(|e| HarnessError::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() || matches!(e, HarnessError::Core(seqanm::Error::InvalidArgument(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
