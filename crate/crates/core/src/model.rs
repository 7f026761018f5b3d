//! Parametric channel model, random draws and noisy observations.
//!
//! Channel entries follow
//! `H[m][n] = sum_l c_l exp(-i 2 pi theta_l m) exp(+i 2 pi tau_l n)`, i.e. a
//! sum of rank-one terms `c_l f_M(theta_l) f_N(tau_l)^H` built from the
//! unnormalized steering sequence `f_K(phi)[j] = exp(-i 2 pi phi j)`.

use std::f64::consts::TAU;

use faer::{c64, Mat, MatRef};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Length-`k` steering sequence `[1, e^{-i2pi phi}, ..., e^{-i2pi phi (k-1)}]`.
pub fn steering(k: usize, phi: f64) -> Result<Vec<c64>> {
    if k == 0 {
        return Err(Error::InvalidDimension("steering length must be positive".into()));
    }
    Ok(steering_unchecked(k, phi))
}

pub(crate) fn steering_unchecked(k: usize, phi: f64) -> Vec<c64> {
    // reduce phi * j modulo 1 before scaling so large indices keep full precision
    let phi = phi.rem_euclid(1.0);
    (0..k)
        .map(|j| {
            let turns = (phi * j as f64).fract();
            c64::from_polar(1.0, -TAU * turns)
        })
        .collect()
}

/// Steering matrix whose column `l` is `f_k(freqs[l])` restricted to `rows`
/// (all `k` rows when `rows` is `None`).
pub(crate) fn steering_matrix(k: usize, freqs: &[f64], rows: Option<&[usize]>) -> Mat<c64> {
    let cols: Vec<Vec<c64>> = freqs.iter().map(|&f| steering_unchecked(k, f)).collect();
    match rows {
        Some(rows) => Mat::from_fn(rows.len(), freqs.len(), |i, l| cols[l][rows[i]]),
        None => Mat::from_fn(k, freqs.len(), |i, l| cols[l][i]),
    }
}

/// Wraparound distance on the unit circle.
pub fn wrap_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: c64,
    /// Spatial frequency in `[0, 1)`.
    pub aoa: f64,
    /// Normalized delay in `[0, 1)`.
    pub delay: f64,
}

/// A nonempty set of paths with pairwise distinct `(aoa, delay)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("a path set needs at least one path".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            if !(0.0..1.0).contains(&p.aoa) || !(0.0..1.0).contains(&p.delay) {
                return Err(Error::InvalidArgument(format!(
                    "path {i}: aoa {} and delay {} must lie in [0, 1)",
                    p.aoa, p.delay
                )));
            }
            if !p.gain.re.is_finite() || !p.gain.im.is_finite() {
                return Err(Error::InvalidArgument(format!("path {i}: non-finite gain")));
            }
            if paths[..i].iter().any(|q| q.aoa == p.aoa && q.delay == p.delay) {
                return Err(Error::InvalidArgument(format!(
                    "path {i} repeats the (aoa, delay) pair of an earlier path"
                )));
            }
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn aoas(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.aoa).collect()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.delay).collect()
    }
}

/// Array, OFDM and noise dimensions of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Antennas.
    pub m: usize,
    /// Subcarriers.
    pub n: usize,
    /// Observed antennas.
    pub mp: usize,
    /// Pilot subcarriers.
    pub np: usize,
    /// Noise variance per complex entry.
    pub sigma2: f64,
    /// Delays are drawn from `[0, delay_max)`.
    pub delay_max: f64,
}

impl SystemConfig {
    pub const DEFAULT_DELAY_MAX: f64 = 0.25;

    pub fn new(m: usize, n: usize, mp: usize, np: usize, sigma2: f64) -> Result<Self> {
        let cfg = Self {
            m,
            n,
            mp,
            np,
            sigma2,
            delay_max: Self::DEFAULT_DELAY_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_delay_max(mut self, delay_max: f64) -> Result<Self> {
        self.delay_max = delay_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("M", "must be positive"));
        }
        if self.n == 0 {
            return Err(Error::config("N", "must be positive"));
        }
        if self.mp == 0 || self.mp > self.m {
            return Err(Error::config("Mp", format!("must lie in 1..={}, got {}", self.m, self.mp)));
        }
        if self.np == 0 || self.np > self.n {
            return Err(Error::config("Np", format!("must lie in 1..={}, got {}", self.n, self.np)));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::config("sigma2", format!("must be finite and >= 0, got {}", self.sigma2)));
        }
        if !(self.delay_max > 0.0 && self.delay_max <= 1.0) {
            return Err(Error::config("delay_max", format!("must lie in (0, 1], got {}", self.delay_max)));
        }
        Ok(())
    }
}

/// Observed antenna and pilot-subcarrier index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPattern {
    m: usize,
    n: usize,
    antennas: Vec<usize>,
    pilots: Vec<usize>,
}

impl SamplingPattern {
    /// Both index lists must be strictly increasing and in range.
    pub fn new(m: usize, n: usize, antennas: Vec<usize>, pilots: Vec<usize>) -> Result<Self> {
        check_index_set("antenna_set", &antennas, m)?;
        check_index_set("pilot_set", &pilots, n)?;
        Ok(Self {
            m,
            n,
            antennas,
            pilots,
        })
    }

    /// Every antenna and every subcarrier.
    pub fn full(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            antennas: (0..m).collect(),
            pilots: (0..n).collect(),
        }
    }

    pub fn antenna_set(&self) -> &[usize] {
        &self.antennas
    }

    pub fn pilot_set(&self) -> &[usize] {
        &self.pilots
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mp(&self) -> usize {
        self.antennas.len()
    }

    pub fn np(&self) -> usize {
        self.pilots.len()
    }

    pub fn is_full(&self) -> bool {
        self.antennas.len() == self.m && self.pilots.len() == self.n
    }
}

fn check_index_set(name: &str, set: &[usize], bound: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} is empty")));
    }
    if set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("{name} must be strictly increasing")));
    }
    if set[set.len() - 1] >= bound {
        return Err(Error::InvalidArgument(format!(
            "{name} index {} out of range 0..{bound}",
            set[set.len() - 1]
        )));
    }
    Ok(())
}

/// The `M x N` channel transfer matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(Mat<c64>);

impl ChannelMatrix {
    pub fn new(entries: Mat<c64>) -> Self {
        Self(entries)
    }

    pub fn as_mat(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_inner(self) -> Mat<c64> {
        self.0
    }

    pub fn m(&self) -> usize {
        self.0.nrows()
    }

    pub fn n(&self) -> usize {
        self.0.ncols()
    }
}

/// Noisy space-frequency samples `Y = H[antennas, pilots] + Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Mat<c64>,
    pub pattern: SamplingPattern,
    pub sigma2: f64,
}

impl Observation {
    pub fn new(y: Mat<c64>, pattern: SamplingPattern, sigma2: f64) -> Result<Self> {
        if y.nrows() != pattern.mp() || y.ncols() != pattern.np() {
            return Err(Error::InvalidDimension(format!(
                "observation is {}x{} but the pattern selects {}x{}",
                y.nrows(),
                y.ncols(),
                pattern.mp(),
                pattern.np()
            )));
        }
        Ok(Self { y, pattern, sigma2 })
    }
}

/// Evaluates the channel of `paths` on an `m x n` antenna/subcarrier grid.
pub fn synth_channel(paths: &PathSet, m: usize, n: usize) -> Result<ChannelMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimension(format!("channel must be nonempty, got {m}x{n}")));
    }
    let mut h = Mat::<c64>::zeros(m, n);
    for p in paths.paths() {
        let a = steering_unchecked(m, p.aoa);
        let b = steering_unchecked(n, p.delay);
        for j in 0..n {
            let bj = p.gain * b[j].conj();
            for i in 0..m {
                h[(i, j)] += a[i] * bj;
            }
        }
    }
    Ok(ChannelMatrix(h))
}

/// Circularly symmetric complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> c64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(s * re, s * im)
}

/// Draws `l` paths: gains `CN(0, 1/l)`, AoAs uniform on `[0, 1)`, delays
/// uniform on `[0, delay_max)`. A path whose `(aoa, delay)` collides with an
/// earlier one is redrawn.
pub fn draw_paths<R: Rng + ?Sized>(l: usize, rng: &mut R, delay_max: f64) -> Result<PathSet> {
    if l == 0 {
        return Err(Error::config("L", "must be positive"));
    }
    if !(delay_max > 0.0 && delay_max <= 1.0) {
        return Err(Error::config("delay_max", format!("must lie in (0, 1], got {delay_max}")));
    }
    let var = 1.0 / l as f64;
    let mut paths: Vec<Path> = Vec::with_capacity(l);
    while paths.len() < l {
        let gain = complex_gaussian(rng, var);
        let aoa: f64 = rng.random();
        let delay = (rng.random::<f64>() * delay_max).min(delay_max * (1.0 - f64::EPSILON));
        let collides = paths.iter().any(|q| {
            (q.aoa - aoa).abs() <= f64::EPSILON && (q.delay - delay).abs() <= f64::EPSILON
        });
        if !collides {
            paths.push(Path { gain, aoa, delay });
        }
    }
    PathSet::new(paths)
}

/// Uniform random antenna and pilot subsets, sorted.
pub fn draw_pattern<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    mp: usize,
    np: usize,
    rng: &mut R,
) -> Result<SamplingPattern> {
    if mp == 0 || mp > m {
        return Err(Error::config("Mp", format!("must lie in 1..={m}, got {mp}")));
    }
    if np == 0 || np > n {
        return Err(Error::config("Np", format!("must lie in 1..={n}, got {np}")));
    }
    let mut antennas = index::sample(rng, m, mp).into_vec();
    antennas.sort_unstable();
    let mut pilots = index::sample(rng, n, np).into_vec();
    pilots.sort_unstable();
    SamplingPattern::new(m, n, antennas, pilots)
}

/// Subsamples `h` on `pattern` and adds `CN(0, sigma2)` noise per entry.
pub fn observe<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    pattern: &SamplingPattern,
    sigma2: f64,
    rng: &mut R,
) -> Result<Observation> {
    if pattern.m() != h.m() || pattern.n() != h.n() {
        return Err(Error::InvalidDimension(format!(
            "pattern is for a {}x{} channel, got {}x{}",
            pattern.m(),
            pattern.n(),
            h.m(),
            h.n()
        )));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::config("sigma2", format!("must be finite and >= 0, got {sigma2}")));
    }
    let mut y = crate::linalg::select(h.as_mat(), pattern.antenna_set(), pattern.pilot_set());
    if sigma2 > 0.0 {
        // column-major fill order is part of the determinism contract
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                y[(i, j)] += complex_gaussian(rng, sigma2);
            }
        }
    }
    Observation::new(y, pattern.clone(), sigma2)
}

/// Minimum over path pairs of the larger of their AoA and delay wraparound
/// distances. `None` for a single path.
pub fn separation(paths: &PathSet) -> Option<f64> {
    let p = paths.paths();
    let mut best: Option<f64> = None;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let d = wrap_distance(p[i].aoa, p[j].aoa).max(wrap_distance(p[i].delay, p[j].delay));
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    best
}

/// Independent random streams for one Monte Carlo trial.
///
/// Each purpose gets its own ChaCha20 stream keyed by the same 256-bit seed,
/// so the draws of one purpose never shift those of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStreams {
    seed: [u8; 32],
}

impl TrialStreams {
    pub const PATHS: u64 = 0;
    pub const PATTERN: u64 = 1;
    pub const NOISE: u64 = 2;

    pub fn new(seed: [u8; 32]) -> Self {
        Self { seed }
    }

    pub fn from_u64(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        Self { seed: bytes }
    }

    pub fn seed(&self) -> [u8; 32] {
        self.seed
    }

    pub fn stream(&self, id: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::from_seed(self.seed);
        rng.set_stream(id);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn close(a: c64, b: c64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn steering_examples() {
        assert_eq!(steering(4, 0.0).unwrap(), vec![c(1.0, 0.0); 4]);
        let s = steering(2, 0.5).unwrap();
        assert!(close(s[0], c(1.0, 0.0), 1e-15) && close(s[1], c(-1.0, 0.0), 1e-15));
        let s = steering(3, 0.25).unwrap();
        assert!(close(s[1], c(0.0, -1.0), 1e-15));
        assert!(close(s[2], c(-1.0, 0.0), 1e-15));
        assert_eq!(steering(0, 0.1), Err(Error::InvalidDimension("steering length must be positive".into())));
    }

    #[test]
    fn single_path_at_zero_frequencies_is_all_ones() {
        let paths = PathSet::new(vec![Path { gain: c(1.0, 0.0), aoa: 0.0, delay: 0.0 }]).unwrap();
        let h = synth_channel(&paths, 3, 2).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!(close(h.as_mat()[(i, j)], c(1.0, 0.0), 1e-15));
            }
        }
    }

    #[test]
    fn synth_entry_matches_double_loop() {
        let paths = PathSet::new(vec![Path { gain: c(0.0, 2.0), aoa: 0.5, delay: 0.25 }]).unwrap();
        let h = synth_channel(&paths, 2, 2).unwrap();
        // 2i * e^{-i pi} * e^{+i pi/2} = 2i * (-1) * i = 2
        assert!(close(h.as_mat()[(1, 1)], c(2.0, 0.0), 1e-14));
        for m in 0..2 {
            for n in 0..2 {
                let phase = -TAU * 0.5 * m as f64 + TAU * 0.25 * n as f64;
                let want = c(0.0, 2.0) * c64::from_polar(1.0, phase);
                assert!(close(h.as_mat()[(m, n)], want, 1e-14));
            }
        }
    }

    #[test]
    fn synth_is_linear_in_the_path_list() {
        let a = Path { gain: c(0.3, -1.0), aoa: 0.1, delay: 0.2 };
        let b = Path { gain: c(-0.7, 0.4), aoa: 0.8, delay: 0.05 };
        let both = synth_channel(&PathSet::new(vec![a, b]).unwrap(), 5, 4).unwrap();
        let ha = synth_channel(&PathSet::new(vec![a]).unwrap(), 5, 4).unwrap();
        let hb = synth_channel(&PathSet::new(vec![b]).unwrap(), 5, 4).unwrap();
        let sum = ha.as_mat() + hb.as_mat();
        assert!((both.as_mat() - &sum).norm_l2() < 1e-14);
    }

    #[test]
    fn path_set_rejects_duplicates_and_out_of_range() {
        let p = Path { gain: c(1.0, 0.0), aoa: 0.2, delay: 0.1 };
        assert!(PathSet::new(vec![p, p]).is_err());
        assert!(PathSet::new(vec![]).is_err());
        assert!(PathSet::new(vec![Path { aoa: 1.0, ..p }]).is_err());
    }

    #[test]
    fn separation_examples() {
        let mk = |t: [f64; 2], d: [f64; 2]| {
            PathSet::new(vec![
                Path { gain: c(1.0, 0.0), aoa: t[0], delay: d[0] },
                Path { gain: c(1.0, 0.0), aoa: t[1], delay: d[1] },
            ])
            .unwrap()
        };
        assert_abs_diff_eq!(separation(&mk([0.0, 0.5], [0.1, 0.1])).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(separation(&mk([0.05, 0.95], [0.0, 0.0])).unwrap(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(separation(&mk([0.1, 0.12], [0.0, 0.3])).unwrap(), 0.3, epsilon = 1e-15);
        let single = PathSet::new(vec![Path { gain: c(1.0, 0.0), aoa: 0.3, delay: 0.3 }]).unwrap();
        assert_eq!(separation(&single), None);
    }

    #[test]
    fn full_pattern_is_identity_selection() {
        let mut rng = TrialStreams::from_u64(3).stream(0);
        let p = draw_pattern(4, 6, 4, 6, &mut rng).unwrap();
        assert_eq!(p.antenna_set(), &[0, 1, 2, 3]);
        assert_eq!(p, SamplingPattern::full(4, 6));
        assert!(draw_pattern(4, 6, 5, 2, &mut rng).is_err());
        assert!(draw_pattern(4, 6, 2, 7, &mut rng).is_err());
    }

    #[test]
    fn noiseless_observation_is_exact_subsample() {
        let mut rng = TrialStreams::from_u64(9).stream(0);
        let paths = draw_paths(3, &mut rng, 0.25).unwrap();
        let h = synth_channel(&paths, 6, 5).unwrap();
        let full = observe(&h, &SamplingPattern::full(6, 5), 0.0, &mut rng).unwrap();
        assert_eq!(full.y, h.as_mat().to_owned());
        let pat = SamplingPattern::new(6, 5, vec![1, 4], vec![0, 2, 3]).unwrap();
        let obs = observe(&h, &pat, 0.0, &mut rng).unwrap();
        for (i, &m) in pat.antenna_set().iter().enumerate() {
            for (j, &n) in pat.pilot_set().iter().enumerate() {
                assert_eq!(obs.y[(i, j)], h.as_mat()[(m, n)]);
            }
        }
    }

    #[test]
    fn config_validation_names_the_key() {
        assert!(matches!(SystemConfig::new(4, 4, 5, 2, 0.1), Err(Error::InvalidConfig { key: "Mp", .. })));
        assert!(matches!(SystemConfig::new(4, 4, 2, 0, 0.1), Err(Error::InvalidConfig { key: "Np", .. })));
        assert!(matches!(SystemConfig::new(4, 4, 2, 2, -1.0), Err(Error::InvalidConfig { key: "sigma2", .. })));
        let cfg = SystemConfig::new(4, 4, 2, 2, 0.1).unwrap();
        assert!(cfg.with_delay_max(0.0).is_err());
        assert!(cfg.with_delay_max(1.0).is_ok());
    }
}
