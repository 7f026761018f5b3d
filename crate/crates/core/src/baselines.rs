//! Grid-based basis pursuit denoising and linear MMSE channel estimators.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef, Side};

use crate::linalg::pinv_thresholded;
use crate::model::{steering_matrix, Observation, SystemConfig};
use crate::{Error, Result};

/// Lowest penalty tried, relative to the one that zeroes every coefficient.
const SEARCH_FLOOR: f64 = 1e-8;

/// Equispaced AoA and delay grid for the BPDN dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryGrid {
    pub aoa_grid_size: usize,
    pub delay_grid_size: usize,
    pub delay_max: f64,
}

impl DictionaryGrid {
    pub const DEFAULT_SIZE: usize = 256;

    pub fn new(aoa_grid_size: usize, delay_grid_size: usize, delay_max: f64) -> Result<Self> {
        if aoa_grid_size == 0 {
            return Err(Error::config("bpdn.grid_aoa", "must be positive"));
        }
        if delay_grid_size == 0 {
            return Err(Error::config("bpdn.grid_delay", "must be positive"));
        }
        if !(delay_max > 0.0 && delay_max <= 1.0) {
            return Err(Error::config("delay_max", format!("must lie in (0, 1], got {delay_max}")));
        }
        Ok(Self {
            aoa_grid_size,
            delay_grid_size,
            delay_max,
        })
    }

    pub fn with_defaults(delay_max: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_SIZE, Self::DEFAULT_SIZE, delay_max)
    }

    /// `g / G` for `g = 0..G`.
    pub fn aoas(&self) -> Vec<f64> {
        let g = self.aoa_grid_size as f64;
        (0..self.aoa_grid_size).map(|i| i as f64 / g).collect()
    }

    /// Equispaced over `[0, delay_max]` including both ends. A full-period
    /// range drops the endpoint, which would alias the origin.
    pub fn delays(&self) -> Vec<f64> {
        let g = self.delay_grid_size;
        if g == 1 {
            return vec![0.0];
        }
        let step = if self.delay_max >= 1.0 {
            self.delay_max / g as f64
        } else {
            self.delay_max / (g - 1) as f64
        };
        (0..g).map(|i| i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnOptions {
    /// The final residual norm lies in `[(1 - residual_band) eps, eps]`.
    pub residual_band: f64,
    /// Iteration cap per penalized solve.
    pub max_iter: usize,
    /// Relative change in the coefficients that stops a penalized solve.
    pub tol: f64,
    /// Cap on penalty updates.
    pub max_search: usize,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        Self {
            residual_band: 0.01,
            max_iter: 2000,
            tol: 1e-4,
            max_search: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpdnEstimate {
    pub h_hat: Mat<c64>,
    /// `aoa_grid_size x delay_grid_size`.
    pub coefficients: Mat<c64>,
    pub residual_norm: f64,
    pub l1_norm: f64,
    /// Penalty weight of the returned penalized solution; zero after a
    /// least-squares polish.
    pub penalty: f64,
    /// False when the residual ball could not be reached and the
    /// least-squares point was returned instead.
    pub feasible: bool,
}

/// `scale * sqrt(Np Mp sigma2)`: the expected noise norm on the observed entries.
pub fn default_epsilon(obs: &Observation, scale: f64) -> f64 {
    scale * (obs.pattern.mp() as f64 * obs.pattern.np() as f64 * obs.sigma2).sqrt()
}

struct Dictionary {
    /// Observed antennas by AoA grid.
    a: Mat<c64>,
    /// Pilots by delay grid.
    b: Mat<c64>,
    a_full: Mat<c64>,
    b_full: Mat<c64>,
    lipschitz: f64,
}

impl Dictionary {
    fn new(obs: &Observation, grid: &DictionaryGrid) -> Result<Self> {
        let (m, n) = (obs.pattern.m(), obs.pattern.n());
        let aoas = grid.aoas();
        let delays = grid.delays();
        let a = steering_matrix(m, &aoas, Some(obs.pattern.antenna_set()));
        let b = steering_matrix(n, &delays, Some(obs.pattern.pilot_set()));
        let a_full = steering_matrix(m, &aoas, None);
        let b_full = steering_matrix(n, &delays, None);
        let la = spectral_norm_sq(a.as_ref())?;
        let lb = spectral_norm_sq(b.as_ref())?;
        Ok(Self {
            a,
            b,
            a_full,
            b_full,
            lipschitz: la * lb,
        })
    }

    /// `A S B^H`.
    fn forward(&self, s: MatRef<'_, c64>) -> Mat<c64> {
        let sb = s * self.b.adjoint();
        &self.a * sb
    }

    /// `A^H R B`.
    fn backward(&self, r: MatRef<'_, c64>) -> Mat<c64> {
        let ar = self.a.adjoint() * r;
        ar * &self.b
    }

    fn synthesize(&self, s: MatRef<'_, c64>) -> Mat<c64> {
        let sb = s * self.b_full.adjoint();
        &self.a_full * sb
    }
}

fn spectral_norm_sq(a: MatRef<'_, c64>) -> Result<f64> {
    let s = a
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular values: {e:?}")))?;
    Ok(s.first().map_or(0.0, |v| v * v))
}

fn l1(s: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..s.ncols() {
        for i in 0..s.nrows() {
            acc += s[(i, j)].norm();
        }
    }
    acc
}

fn soft_threshold(z: c64, t: f64) -> c64 {
    let r = z.norm();
    if r <= t {
        c64::new(0.0, 0.0)
    } else {
        z * ((r - t) / r)
    }
}

/// Accelerated proximal gradient on `0.5 ||Y - A S B^H||^2 + penalty ||S||_1`,
/// with gradient-based restarts.
fn fista(dict: &Dictionary, y: MatRef<'_, c64>, penalty: f64, start: Mat<c64>, opts: &BpdnOptions) -> Mat<c64> {
    let step = 1.0 / dict.lipschitz;
    let thresh = penalty * step;
    let mut x = start;
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..opts.max_iter {
        let r = y - dict.forward(z.as_ref());
        let g = dict.backward(r.as_ref());
        let x_next = Mat::from_fn(x.nrows(), x.ncols(), |i, j| soft_threshold(z[(i, j)] + g[(i, j)] * step, thresh));
        let diff = &x_next - &x;
        let dnorm = diff.norm_l2();
        let xnorm = x_next.norm_l2();
        // restart momentum when the step opposes it
        let mut align = 0.0;
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                align += ((z[(i, j)] - x_next[(i, j)]).conj() * diff[(i, j)]).re;
            }
        }
        let t_next = if align > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let mom = if align > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        z = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x_next[(i, j)] + diff[(i, j)] * mom);
        x = x_next;
        t = t_next;
        if dnorm <= opts.tol * xnorm.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    x
}

/// Basis pursuit denoising over the gridded dictionary: the channel
/// synthesized from the coefficients of least `l1` norm whose observed
/// residual is at most `epsilon`.
///
/// When the residual ball is out of reach the support of the least
/// penalized solution is refit by least squares and `feasible` reports
/// whether that point lands in the ball.
pub fn bpdn_estimate(obs: &Observation, grid: &DictionaryGrid, epsilon: f64, opts: &BpdnOptions) -> Result<BpdnEstimate> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if !(opts.residual_band > 0.0 && opts.residual_band < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "residual band must lie in (0, 1), got {}",
            opts.residual_band
        )));
    }
    let (m, n) = (obs.pattern.m(), obs.pattern.n());
    let (ga, gd) = (grid.aoa_grid_size, grid.delay_grid_size);
    let y = obs.y.as_ref();
    let ynorm = y.norm_l2();
    if epsilon >= ynorm {
        return Ok(BpdnEstimate {
            h_hat: Mat::zeros(m, n),
            coefficients: Mat::zeros(ga, gd),
            residual_norm: ynorm,
            l1_norm: 0.0,
            penalty: f64::INFINITY,
            feasible: true,
        });
    }
    let dict = Dictionary::new(obs, grid)?;
    let corr = dict.backward(y);
    let penalty_max = corr.as_ref().col_iter().flat_map(|c| c.iter().map(|z| z.norm()).collect::<Vec<_>>()).fold(0.0, f64::max);
    let resid = |s: &Mat<c64>| (y - dict.forward(s.as_ref())).norm_l2();
    let lower = (1.0 - opts.residual_band) * epsilon;

    // Safeguarded secant search in (log penalty, log residual); the
    // residual grows with the penalty and equals ||y|| at the top.
    let floor = penalty_max.ln() + SEARCH_FLOOR.ln();
    let target = if epsilon > 0.0 {
        (0.5 * (lower + epsilon)).ln()
    } else {
        f64::NEG_INFINITY
    };
    let mut above = (penalty_max.ln(), ynorm.ln());
    let mut prev_above: Option<(f64, f64)> = None;
    let mut below: Option<(f64, f64)> = None;
    let mut s = Mat::<c64>::zeros(ga, gd);
    let mut feasible_best: Option<(Mat<c64>, f64, f64)> = None;
    let mut found = None;
    for _ in 0..opts.max_search {
        let next = match below {
            Some(b) => {
                let width = above.0 - b.0;
                let guess = secant(b, above, target).unwrap_or(b.0 + 0.5 * width);
                guess.clamp(b.0 + 0.1 * width, above.0 - 0.1 * width)
            }
            None => {
                let guess = prev_above
                    .and_then(|p| secant(above, p, target))
                    .unwrap_or(above.0 - 4.0_f64.ln());
                guess.clamp(above.0 - 16.0_f64.ln(), above.0 - 1.5_f64.ln())
            }
        };
        if next < floor {
            break;
        }
        s = fista(&dict, y, next.exp(), s, opts);
        let r = resid(&s);
        if r > epsilon {
            prev_above = Some(above);
            above = (next, r.ln());
        } else if r < lower {
            below = Some((next, r.max(f64::MIN_POSITIVE).ln()));
            feasible_best = Some((s.clone(), next.exp(), r));
        } else {
            found = Some((s.clone(), next.exp(), r));
            break;
        }
        if let Some(b) = below {
            if above.0 - b.0 < 1e-12 {
                break;
            }
        }
    }

    let (coefficients, penalty, residual_norm, feasible) = match (found, feasible_best) {
        (Some((s, p, r)), _) | (None, Some((s, p, r))) => (s, p, r, true),
        (None, None) => {
            let s_ls = polish(&dict, y, s.as_ref())?;
            let r = resid(&s_ls);
            let ok = r <= epsilon + 1e-6 * ynorm;
            (s_ls, 0.0, r, ok)
        }
    };
    let h_hat = dict.synthesize(coefficients.as_ref());
    Ok(BpdnEstimate {
        h_hat,
        l1_norm: l1(coefficients.as_ref()),
        coefficients,
        residual_norm,
        penalty,
        feasible,
    })
}

/// Abscissa where the line through `a` and `b` reaches `target`.
fn secant(a: (f64, f64), b: (f64, f64), target: f64) -> Option<f64> {
    let slope = (b.1 - a.1) / (b.0 - a.0);
    let x = a.0 + (target - a.1) / slope;
    (slope > 0.0 && x.is_finite()).then_some(x)
}

/// Least squares on the support of `s`.
fn polish(dict: &Dictionary, y: MatRef<'_, c64>, s: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let peak = s.col_iter().flat_map(|c| c.iter().map(|z| z.norm()).collect::<Vec<_>>()).fold(0.0, f64::max);
    let mut support = Vec::new();
    for j in 0..s.ncols() {
        for i in 0..s.nrows() {
            if s[(i, j)].norm() > 1e-3 * peak {
                support.push((i, j));
            }
        }
    }
    let (mp, np) = (y.nrows(), y.ncols());
    let phi = Mat::from_fn(mp * np, support.len(), |r, k| {
        let (g, h) = support[k];
        let (i, j) = (r % mp, r / mp);
        dict.a[(i, g)] * dict.b[(j, h)].conj()
    });
    let yv = Mat::from_fn(mp * np, 1, |r, _| y[(r % mp, r / mp)]);
    let coef = pinv_thresholded(phi.as_ref(), 1e-10)? * yv;
    let mut out = Mat::<c64>::zeros(s.nrows(), s.ncols());
    for (k, &(g, h)) in support.iter().enumerate() {
        out[(g, h)] = coef[(k, 0)];
    }
    Ok(out)
}

/// Prior correlation of subcarriers `k` apart when delays are uniform on
/// `[0, delay_max]`: `E exp(i 2 pi tau k)`.
pub fn delay_correlation(k: i64, delay_max: f64) -> c64 {
    if k == 0 {
        return c64::new(1.0, 0.0);
    }
    let w = 2.0 * PI * delay_max * k as f64;
    // (exp(iw) - 1) / (iw)
    c64::new(w.sin() / w, (1.0 - w.cos()) / w)
}

/// `N x N` Hermitian Toeplitz prior covariance across subcarriers.
pub fn delay_covariance(n: usize, delay_max: f64) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| delay_correlation(i as i64 - j as i64, delay_max))
}

/// Linear MMSE estimate under a prior that is white across antennas and
/// correlated across subcarriers by [`delay_covariance`]. Unobserved
/// antennas get the prior mean, zero.
pub fn lmmse_estimate(obs: &Observation, prior: &SystemConfig) -> Result<Mat<c64>> {
    prior.validate()?;
    let (m, n) = (obs.pattern.m(), obs.pattern.n());
    if prior.m != m || prior.n != n {
        return Err(Error::InvalidDimension(format!(
            "prior is {}x{} but the observation pattern is {m}x{n}",
            prior.m, prior.n
        )));
    }
    let pilots = obs.pattern.pilot_set();
    let np = pilots.len();
    let r = delay_covariance(n, prior.delay_max);
    let gram = Mat::from_fn(np, np, |i, j| {
        let v = r[(pilots[i], pilots[j])];
        if i == j {
            v + c64::new(obs.sigma2, 0.0)
        } else {
            v
        }
    });
    let llt = gram
        .llt(Side::Lower)
        .map_err(|e| Error::Numerical(format!("regularized prior gram is not positive definite: {e:?}")))?;
    let yt = obs.y.transpose().to_owned();
    let weights = llt.solve(yt.as_ref());
    let cross = Mat::from_fn(n, np, |i, j| r[(i, pilots[j])]);
    let rows_t = cross * weights;
    let mut h = Mat::<c64>::zeros(m, n);
    for (k, &a) in obs.pattern.antenna_set().iter().enumerate() {
        for j in 0..n {
            h[(a, j)] = rows_t[(j, k)];
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use crate::model::SamplingPattern;
    use approx::assert_relative_eq;

    fn obs_from(y: Mat<c64>, pattern: SamplingPattern, sigma2: f64) -> Observation {
        Observation::new(y, pattern, sigma2).unwrap()
    }

    #[test]
    fn grid_points() {
        let g = DictionaryGrid::new(4, 5, 0.25).unwrap();
        assert_eq!(g.aoas(), vec![0.0, 0.25, 0.5, 0.75]);
        let d = g.delays();
        assert_eq!(d.len(), 5);
        assert_relative_eq!(d[4], 0.25, max_relative = 1e-15);
        assert!(DictionaryGrid::new(0, 5, 0.25).is_err());
    }

    #[test]
    fn large_epsilon_returns_zero() {
        let pattern = SamplingPattern::full(4, 4);
        let y = Mat::from_fn(4, 4, |i, j| c64::new(i as f64, j as f64));
        let obs = obs_from(y.clone(), pattern, 0.1);
        let grid = DictionaryGrid::new(8, 8, 0.25).unwrap();
        let est = bpdn_estimate(&obs, &grid, y.norm_l2(), &BpdnOptions::default()).unwrap();
        assert_eq!(est.l1_norm, 0.0);
        assert_eq!(est.h_hat.norm_l2(), 0.0);
    }

    #[test]
    fn on_grid_atom_recovered_exactly() {
        let (m, n) = (8, 8);
        let grid = DictionaryGrid::new(16, 12, 0.25).unwrap();
        let (g, h) = (5, 7);
        let gain = c64::new(0.8, -0.6);
        let a = crate::model::steering(m, grid.aoas()[g]).unwrap();
        let b = crate::model::steering(n, grid.delays()[h]).unwrap();
        let y = Mat::from_fn(m, n, |i, j| gain * a[i] * b[j].conj());
        let obs = obs_from(y.clone(), SamplingPattern::full(m, n), 0.0);
        let est = bpdn_estimate(&obs, &grid, 0.0, &BpdnOptions::default()).unwrap();
        assert!(est.feasible);
        assert!((est.coefficients[(g, h)] - gain).norm() < 1e-6);
        assert!((&est.h_hat - &y).norm_l2() < 1e-6 * y.norm_l2());
    }

    #[test]
    fn lmmse_scalar_wiener() {
        let pattern = SamplingPattern::full(1, 1);
        let y = Mat::from_fn(1, 1, |_, _| c64::new(2.0, -1.0));
        let obs = obs_from(y, pattern, 0.5);
        let prior = SystemConfig::new(1, 1, 1, 1, 0.5).unwrap();
        let h = lmmse_estimate(&obs, &prior).unwrap();
        let expect = c64::new(2.0, -1.0) * (1.0 / 1.5);
        assert!((h[(0, 0)] - expect).norm() < 1e-14);
    }

    #[test]
    fn lmmse_vanishes_for_huge_noise() {
        let pattern = SamplingPattern::new(4, 6, vec![0, 2], vec![1, 3, 4]).unwrap();
        let y = Mat::from_fn(2, 3, |i, j| c64::new(1.0 + i as f64, j as f64));
        let obs = obs_from(y, pattern, 1e12);
        let prior = SystemConfig::new(4, 6, 2, 3, 1e12).unwrap();
        let h = lmmse_estimate(&obs, &prior).unwrap();
        assert!(h.norm_l2() < 1e-10);
    }

    #[test]
    fn delay_covariance_is_hermitian_psd() {
        for &dmax in &[0.01, 0.25, 0.5, 0.9, 1.0] {
            let r = delay_covariance(24, dmax);
            for i in 0..24 {
                for j in 0..24 {
                    assert!((r[(i, j)] - r[(j, i)].conj()).norm() < 1e-15);
                }
            }
            let ev = hermitian_eigenvalues(r.as_ref()).unwrap();
            assert!(ev[0] >= -1e-12, "delay_max {dmax}: {}", ev[0]);
        }
    }

    #[test]
    fn delay_correlation_matches_quadrature() {
        let (k, dmax) = (3, 0.3);
        let steps = 200_000;
        let mut acc = c64::new(0.0, 0.0);
        for s in 0..steps {
            let tau = (s as f64 + 0.5) / steps as f64 * dmax;
            let w = 2.0 * PI * tau * k as f64;
            acc += c64::new(w.cos(), w.sin());
        }
        acc *= 1.0 / steps as f64;
        assert!((acc - delay_correlation(k, dmax)).norm() < 1e-9);
    }
}
