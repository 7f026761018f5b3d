//! Seeded trials and sweeps.

use std::time::Instant;

use rayon::prelude::*;
use seqanm::baselines::{bpdn_estimate, default_epsilon, lmmse_estimate, BpdnOptions};
use seqanm::bounds::{fisher_crlb, BoundReport};
use seqanm::estimator::estimate_channel;
use seqanm::model::{draw_paths, draw_pattern, observe, separation, synth_channel, Observation, TrialStreams};
use seqanm::{c64, Mat};
use sha2::{Digest, Sha256};

use crate::config::{EstimatorKind, ExperimentConfig, PointConfig, SweepAxis};
use crate::error::Result;

/// `sha256(master_seed || sweep_index || trial)`, all little-endian `u64`.
pub fn trial_seed(master_seed: u64, sweep_index: usize, trial: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((sweep_index as u64).to_le_bytes());
    h.update((trial as u64).to_le_bytes());
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    pub estimator: EstimatorKind,
    /// `||H_hat - H||^2 / (M N)`; NaN when the estimator failed.
    pub mse: f64,
    pub converged: bool,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: [u8; 32],
    pub sweep_index: usize,
    pub sweep_value: usize,
    pub trial: usize,
    pub separation: Option<f64>,
    pub bounds: BoundReport,
    /// `||H||^2 / (M N)`.
    pub channel_power: f64,
    pub outcomes: Vec<EstimatorOutcome>,
}

impl TrialResult {
    pub fn outcome(&self, kind: EstimatorKind) -> Option<&EstimatorOutcome> {
        self.outcomes.iter().find(|o| o.estimator == kind)
    }
}

/// Closed-form bounds for a point; all zero when there is no noise.
pub fn point_bounds(point: &PointConfig) -> Result<BoundReport> {
    let s = &point.system;
    if s.sigma2 == 0.0 {
        return Ok(BoundReport {
            universal: 0.0,
            sequential_detailed: 0.0,
            sequential_approx: 0.0,
            exact_crlb: None,
        });
    }
    Ok(BoundReport::closed_form(point.l, s.sigma2, s.m, s.mp, s.np)?)
}

/// Runs trial `trial` of sweep point `sweep_index`.
pub fn run_trial(cfg: &ExperimentConfig, sweep_index: usize, trial: usize) -> Result<TrialResult> {
    let values = cfg.effective_sweep_values();
    let value = *values.get(sweep_index).ok_or_else(|| {
        crate::error::HarnessError::config(
            "sweep_values",
            format!("sweep index {sweep_index} is out of range for {} values", values.len()),
        )
    })?;
    let point = cfg.point_config(value)?;
    run_trial_at(cfg, &point, sweep_index, value, trial)
}

fn per_element_error(est: &Mat<c64>, truth: &Mat<c64>) -> f64 {
    (est - truth).squared_norm_l2() / (truth.nrows() * truth.ncols()) as f64
}

fn run_estimator(
    kind: EstimatorKind,
    cfg: &ExperimentConfig,
    point: &PointConfig,
    obs: &Observation,
    truth: &Mat<c64>,
) -> EstimatorOutcome {
    let start = Instant::now();
    let s = &point.system;
    let result: seqanm::Result<(Mat<c64>, bool)> = match kind {
        EstimatorKind::Proposed => {
            estimate_channel(obs, point.l, &cfg.estimator_options()).map(|r| {
                let ok = r.converged();
                (r.h_hat, ok)
            })
        }
        EstimatorKind::Bpdn => {
            let eps = default_epsilon(obs, cfg.epsilon_scale);
            bpdn_estimate(obs, &cfg.grid(), eps, &BpdnOptions::default()).map(|r| (r.h_hat, r.feasible))
        }
        EstimatorKind::Lmmse => lmmse_estimate(obs, s).map(|h| (h, true)),
        EstimatorKind::Zero => Ok((Mat::zeros(s.m, s.n), true)),
    };
    let wall_ms = if cfg.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    match result {
        Ok((h, converged)) => EstimatorOutcome {
            estimator: kind,
            mse: per_element_error(&h, truth),
            converged,
            wall_ms,
            error: None,
        },
        Err(e) => EstimatorOutcome {
            estimator: kind,
            mse: f64::NAN,
            converged: false,
            wall_ms,
            error: Some(e.to_string()),
        },
    }
}

/// Runs one trial at an explicit point configuration.
pub fn run_trial_at(
    cfg: &ExperimentConfig,
    point: &PointConfig,
    sweep_index: usize,
    sweep_value: usize,
    trial: usize,
) -> Result<TrialResult> {
    let s = &point.system;
    let seed = trial_seed(cfg.master_seed, sweep_index, trial);
    let streams = TrialStreams::new(seed);
    let paths = draw_paths(point.l, &mut streams.stream(TrialStreams::PATHS), s.delay_max)?;
    let pattern = draw_pattern(s.m, s.n, s.mp, s.np, &mut streams.stream(TrialStreams::PATTERN))?;
    let h = synth_channel(&paths, s.m, s.n)?;
    let obs = observe(&h, &pattern, s.sigma2, &mut streams.stream(TrialStreams::NOISE))?;
    let mut bounds = point_bounds(point)?;
    if cfg.crlb && s.sigma2 > 0.0 {
        bounds.exact_crlb = fisher_crlb(&paths, &pattern, s.sigma2).ok();
    }
    let truth = h.into_inner();
    let outcomes = cfg
        .estimators
        .iter()
        .map(|&k| run_estimator(k, cfg, point, &obs, &truth))
        .collect();
    Ok(TrialResult {
        seed,
        sweep_index,
        sweep_value,
        trial,
        separation: separation(&paths),
        bounds,
        channel_power: truth.squared_norm_l2() / (s.m * s.n) as f64,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    /// Over successful trials; NaN when none succeeded.
    pub mean: f64,
    pub median: f64,
    pub failures: usize,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub value: usize,
    pub config: PointConfig,
    pub bounds: BoundReport,
    pub trials: Vec<TrialResult>,
    pub summaries: Vec<EstimatorSummary>,
}

impl SweepPoint {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == kind)
    }

    /// MSE values of one estimator in trial order (NaN for failures).
    pub fn mses(&self, kind: EstimatorKind) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| t.outcome(kind).map(|o| o.mse))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Some estimator failed in at least one trial.
    pub partial: bool,
}

/// Median of the finite values; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn summarize(kind: EstimatorKind, trials: &[TrialResult]) -> EstimatorSummary {
    let outcomes: Vec<&EstimatorOutcome> = trials.iter().filter_map(|t| t.outcome(kind)).collect();
    let mses: Vec<f64> = outcomes.iter().map(|o| o.mse).collect();
    EstimatorSummary {
        estimator: kind,
        mean: mean(&mses),
        median: median(&mses),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        not_converged: outcomes.iter().filter(|o| o.error.is_none() && !o.converged).count(),
    }
}

/// Runs every trial of every sweep point. Trials run in parallel; results
/// are collected in trial order so the table does not depend on scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    let mut points = Vec::new();
    for (index, value) in cfg.effective_sweep_values().into_iter().enumerate() {
        let point = cfg.point_config(value)?;
        let trials = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial_at(cfg, &point, index, value, t))
            .collect::<Result<Vec<_>>>()?;
        let summaries = cfg.estimators.iter().map(|&k| summarize(k, &trials)).collect();
        points.push(SweepPoint {
            index,
            value,
            config: point,
            bounds: point_bounds(&point)?,
            trials,
            summaries,
        });
    }
    let partial = points
        .iter()
        .any(|p| p.summaries.iter().any(|s| s.failures > 0));
    Ok(SweepTable {
        axis: cfg.sweep,
        points,
        partial,
    })
}
