//! Flat `key=value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use seqanm::baselines::DictionaryGrid;
use seqanm::estimator::EstimatorOptions;
use seqanm::model::SystemConfig;
use seqanm::sdp::SolverOptions;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "M",
    "N",
    "Mp",
    "Np",
    "L",
    "sigma2",
    "delay_max",
    "trials",
    "master_seed",
    "sweep",
    "sweep_values",
    "estimators",
    "timing",
    "crlb",
    "paper_scale",
    "sdp.tol",
    "sdp.max_iter",
    "sdp.rho",
    "bpdn.grid_aoa",
    "bpdn.grid_delay",
    "bpdn.epsilon_scale",
];

pub const DESK_SCALE: usize = 64;
pub const PAPER_SCALE: usize = 100;
pub const DEFAULT_TRIALS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Proposed,
    Bpdn,
    Lmmse,
    Zero,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::Proposed, Self::Bpdn, Self::Lmmse, Self::Zero];

    pub fn name(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Bpdn => "bpdn",
            Self::Lmmse => "lmmse",
            Self::Zero => "zero",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown estimator {s:?}; expected one of proposed, bpdn, lmmse, zero"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Sweep values are pilot counts `Np`.
    Pilots,
    /// Sweep values are path counts `L`.
    Paths,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pilots => "pilots",
            Self::Paths => "paths",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Self::Pilots => "Np",
            Self::Paths => "L",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// Path count when the sweep is over pilots.
    pub l: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub sweep: SweepAxis,
    pub sweep_values: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    /// Record wall-clock times; when off, `wall_ms` is written as 0 so
    /// repeated runs produce identical files.
    pub timing: bool,
    /// Also evaluate the exact CRLB for each drawn pattern.
    pub crlb: bool,
    pub paper_scale: bool,
    pub sdp: SolverOptions,
    pub grid_aoa: usize,
    pub grid_delay: usize,
    pub epsilon_scale: f64,
    entries: BTreeMap<String, String>,
}

/// One sweep point: the system dimensions and path count it runs at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointConfig {
    pub system: SystemConfig,
    pub l: usize,
}

fn parse<T: FromStr>(key: &'static str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e: T::Err| HarnessError::config(key, format!("cannot parse {raw:?}: {e}")))
}

fn parse_bool(key: &'static str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(HarnessError::config(key, format!("expected true or false, got {other:?}"))),
    }
}

fn canonical_key(key: &str) -> Result<&'static str> {
    KEYS.iter()
        .copied()
        .find(|k| *k == key)
        .ok_or_else(|| HarnessError::UnknownKey(key.to_string()))
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// repeated keys are an error.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Syntax {
            line: lineno + 1,
            reason: format!("expected key=value, got {line:?}"),
        })?;
        let key = canonical_key(k.trim())?;
        if out.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(HarnessError::Syntax {
                line: lineno + 1,
                reason: format!("key {key} given twice"),
            });
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_entries(parse_entries(&text)?)
    }

    pub fn from_str_entries(text: &str) -> Result<Self> {
        Self::from_entries(parse_entries(text)?)
    }

    /// Builds a config from raw entries; absent keys take their defaults.
    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        for k in entries.keys() {
            canonical_key(k)?;
        }
        let get = |k: &str| entries.get(k).map(String::as_str);
        let paper_scale = get("paper_scale").map(|v| parse_bool("paper_scale", v)).transpose()?.unwrap_or(false);
        let scale = if paper_scale { PAPER_SCALE } else { DESK_SCALE };
        let m = get("M").map(|v| parse("M", v)).transpose()?.unwrap_or(scale);
        let n = get("N").map(|v| parse("N", v)).transpose()?.unwrap_or(scale);
        let mp = get("Mp").map(|v| parse("Mp", v)).transpose()?.unwrap_or(m);
        let np = get("Np").map(|v| parse("Np", v)).transpose()?.unwrap_or(n / 8);
        let sigma2 = get("sigma2").map(|v| parse("sigma2", v)).transpose()?.unwrap_or(0.1);
        let delay_max = get("delay_max")
            .map(|v| parse("delay_max", v))
            .transpose()?
            .unwrap_or(SystemConfig::DEFAULT_DELAY_MAX);
        let system = SystemConfig {
            m,
            n,
            mp,
            np,
            sigma2,
            delay_max,
        };
        system.validate()?;
        let l = get("L").map(|v| parse("L", v)).transpose()?.unwrap_or(3);
        if l == 0 {
            return Err(HarnessError::config("L", "must be positive"));
        }
        let trials = get("trials").map(|v| parse("trials", v)).transpose()?.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(HarnessError::config("trials", "must be at least 1"));
        }
        let master_seed = get("master_seed").map(|v| parse("master_seed", v)).transpose()?.unwrap_or(0);
        let sweep = match get("sweep").unwrap_or("pilots") {
            "pilots" => SweepAxis::Pilots,
            "paths" => SweepAxis::Paths,
            other => return Err(HarnessError::config("sweep", format!("expected pilots or paths, got {other:?}"))),
        };
        let sweep_values = match get("sweep_values") {
            Some(v) if !v.trim().is_empty() => v
                .split(',')
                .map(|s| parse::<usize>("sweep_values", s))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        let estimators = match get("estimators") {
            Some(v) => {
                let mut out = Vec::new();
                for s in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let k: EstimatorKind = s.parse().map_err(|e| HarnessError::config("estimators", e))?;
                    if !out.contains(&k) {
                        out.push(k);
                    }
                }
                if out.is_empty() {
                    return Err(HarnessError::config("estimators", "select at least one estimator"));
                }
                out
            }
            None => EstimatorKind::ALL.to_vec(),
        };
        let timing = get("timing").map(|v| parse_bool("timing", v)).transpose()?.unwrap_or(true);
        let crlb = get("crlb").map(|v| parse_bool("crlb", v)).transpose()?.unwrap_or(false);
        let defaults = SolverOptions::default();
        let sdp = SolverOptions {
            tol: get("sdp.tol").map(|v| parse("sdp.tol", v)).transpose()?.unwrap_or(defaults.tol),
            max_iter: get("sdp.max_iter")
                .map(|v| parse("sdp.max_iter", v))
                .transpose()?
                .unwrap_or(defaults.max_iter),
            rho: get("sdp.rho").map(|v| parse("sdp.rho", v)).transpose()?.unwrap_or(defaults.rho),
            ..defaults
        };
        sdp.validate()?;
        let grid_aoa = get("bpdn.grid_aoa")
            .map(|v| parse("bpdn.grid_aoa", v))
            .transpose()?
            .unwrap_or(DictionaryGrid::DEFAULT_SIZE);
        let grid_delay = get("bpdn.grid_delay")
            .map(|v| parse("bpdn.grid_delay", v))
            .transpose()?
            .unwrap_or(DictionaryGrid::DEFAULT_SIZE);
        DictionaryGrid::new(grid_aoa, grid_delay, delay_max)?;
        let epsilon_scale = get("bpdn.epsilon_scale")
            .map(|v| parse("bpdn.epsilon_scale", v))
            .transpose()?
            .unwrap_or(1.0);
        if !(epsilon_scale >= 0.0) || !f64::is_finite(epsilon_scale) {
            return Err(HarnessError::config("bpdn.epsilon_scale", format!("must be finite and >= 0, got {epsilon_scale}")));
        }
        let cfg = Self {
            system,
            l,
            trials,
            master_seed,
            sweep,
            sweep_values,
            estimators,
            timing,
            crlb,
            paper_scale,
            sdp,
            grid_aoa,
            grid_delay,
            epsilon_scale,
            entries,
        };
        for v in cfg.effective_sweep_values() {
            cfg.point_config(v)?;
        }
        Ok(cfg)
    }

    /// Raw entries with `overrides` replacing same-named keys, re-validated.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let mut entries = self.entries.clone();
        for (k, v) in overrides {
            entries.insert(canonical_key(k)?.to_string(), v.clone());
        }
        Self::from_entries(entries)
    }

    /// Sweep values, or the single configured `Np` or `L` when none were listed.
    pub fn effective_sweep_values(&self) -> Vec<usize> {
        if !self.sweep_values.is_empty() {
            return self.sweep_values.clone();
        }
        match self.sweep {
            SweepAxis::Pilots => vec![self.system.np],
            SweepAxis::Paths => vec![self.l],
        }
    }

    /// The configuration of one sweep point.
    pub fn point_config(&self, value: usize) -> Result<PointConfig> {
        let mut system = self.system;
        let mut l = self.l;
        match self.sweep {
            SweepAxis::Pilots => system.np = value,
            SweepAxis::Paths => l = value,
        }
        if value == 0 {
            return Err(HarnessError::config(
                "sweep_values",
                format!("{} value {value} must be positive", self.sweep.key()),
            ));
        }
        if self.sweep == SweepAxis::Pilots && value > system.n {
            return Err(HarnessError::config(
                "sweep_values",
                format!("Np value {value} must lie in 1..={}", system.n),
            ));
        }
        system.validate()?;
        Ok(PointConfig { system, l })
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            sdp: self.sdp,
            ..EstimatorOptions::default()
        }
    }

    pub fn grid(&self) -> DictionaryGrid {
        DictionaryGrid {
            aoa_grid_size: self.grid_aoa,
            delay_grid_size: self.grid_delay,
            delay_max: self.system.delay_max,
        }
    }

    /// Every key with its effective value, in canonical order.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let s = &self.system;
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let ests = self.estimators.iter().map(|e| e.name()).collect::<Vec<_>>().join(",");
        vec![
            ("M", s.m.to_string()),
            ("N", s.n.to_string()),
            ("Mp", s.mp.to_string()),
            ("Np", s.np.to_string()),
            ("L", self.l.to_string()),
            ("sigma2", format!("{:?}", s.sigma2)),
            ("delay_max", format!("{:?}", s.delay_max)),
            ("trials", self.trials.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("sweep", self.sweep.name().to_string()),
            ("sweep_values", list(&self.effective_sweep_values())),
            ("estimators", ests),
            ("timing", self.timing.to_string()),
            ("crlb", self.crlb.to_string()),
            ("paper_scale", self.paper_scale.to_string()),
            ("sdp.tol", format!("{:?}", self.sdp.tol)),
            ("sdp.max_iter", self.sdp.max_iter.to_string()),
            ("sdp.rho", format!("{:?}", self.sdp.rho)),
            ("bpdn.grid_aoa", self.grid_aoa.to_string()),
            ("bpdn.grid_delay", self.grid_delay.to_string()),
            ("bpdn.epsilon_scale", format!("{:?}", self.epsilon_scale)),
        ]
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.resolved() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_desk_scale() {
        let cfg = ExperimentConfig::from_str_entries("").unwrap();
        assert_eq!((cfg.system.m, cfg.system.n, cfg.system.mp, cfg.system.np), (64, 64, 64, 8));
        assert_eq!(cfg.trials, 50);
        assert_eq!(cfg.estimators, EstimatorKind::ALL.to_vec());
        assert_eq!(cfg.effective_sweep_values(), vec![8]);
    }

    #[test]
    fn paper_scale_switches_dimensions() {
        let cfg = ExperimentConfig::from_str_entries("paper_scale = true\nNp = 12").unwrap();
        assert_eq!((cfg.system.m, cfg.system.n, cfg.system.mp, cfg.system.np), (100, 100, 100, 12));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_str_entries("Q = 3").unwrap_err();
        assert!(matches!(err, HarnessError::UnknownKey(ref k) if k == "Q"));
    }

    #[test]
    fn comments_and_repeats() {
        let cfg = ExperimentConfig::from_str_entries("# header\nL = 4 # paths\n\n").unwrap();
        assert_eq!(cfg.l, 4);
        assert!(ExperimentConfig::from_str_entries("L=1\nL=2").is_err());
        assert!(ExperimentConfig::from_str_entries("L").is_err());
    }

    #[test]
    fn bad_values_name_their_key() {
        for (text, key) in [
            ("Np = 100", "Np"),
            ("sigma2 = -1", "sigma2"),
            ("sweep_values = 4,200", "sweep_values"),
            ("sdp.tol = 0", "sdp.tol"),
            ("estimators = proposed,magic", "estimators"),
            ("trials = 0", "trials"),
            ("timing = maybe", "timing"),
        ] {
            let msg = ExperimentConfig::from_str_entries(text).unwrap_err().to_string();
            assert!(msg.contains(key), "{text}: {msg}");
        }
    }

    #[test]
    fn hash_tracks_effective_values() {
        let a = ExperimentConfig::from_str_entries("").unwrap();
        let b = ExperimentConfig::from_str_entries("M = 64").unwrap();
        let c = ExperimentConfig::from_str_entries("M = 65\nMp = 64").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn overrides_replace_entries() {
        let base = ExperimentConfig::from_str_entries("L = 2\nNp = 10").unwrap();
        let mut o = BTreeMap::new();
        o.insert("L".to_string(), "5".to_string());
        let cfg = base.with_overrides(&o).unwrap();
        assert_eq!((cfg.l, cfg.system.np), (5, 10));
        o.insert("bogus".to_string(), "1".to_string());
        assert!(base.with_overrides(&o).is_err());
    }

    #[test]
    fn paths_sweep_points() {
        let cfg = ExperimentConfig::from_str_entries("sweep = paths\nsweep_values = 2,4,8\nNp = 64").unwrap();
        let p = cfg.point_config(8).unwrap();
        assert_eq!((p.l, p.system.np), (8, 64));
    }
}
