//! Closed-form per-element MSE floors and the exact Cramér-Rao bound for a
//! fixed sampling pattern.

use std::f64::consts::PI;

use faer::{c64, Mat, Side};

use crate::model::{steering_unchecked, PathSet, SamplingPattern};
use crate::{Error, Result};

/// Ratio of smallest to largest eigenvalue of the Jacobi-scaled Fisher
/// matrix below which the model is declared unidentifiable.
pub const SINGULAR_REL_TOL: f64 = 1e-10;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `2 L sigma2 / (mp np)`: floor on the per-element MSE of any unbiased
/// channel estimator.
pub fn universal_bound(l: usize, sigma2: f64, mp: usize, np: usize) -> Result<f64> {
    positive("L", l as f64)?;
    positive("sigma2", sigma2)?;
    positive("Mp", mp as f64)?;
    positive("Np", np as f64)?;
    Ok(2.0 * l as f64 * sigma2 / (mp as f64 * np as f64))
}

/// Reference curves for the two-step estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialBound {
    pub detailed: f64,
    pub approx: f64,
}

/// Per-element MSE reference for the sequential estimator, in its detailed
/// form and its large-dimension approximation `L^2 sigma2 / (mp np)`.
pub fn sequential_bound(l: usize, sigma2: f64, m: usize, mp: usize, np: usize) -> Result<SequentialBound> {
    positive("L", l as f64)?;
    positive("sigma2", sigma2)?;
    positive("M", m as f64)?;
    positive("Mp", mp as f64)?;
    positive("Np", np as f64)?;
    let (l, m, mp, np) = (l as f64, m as f64, mp as f64, np as f64);
    let detailed = l * l * sigma2 * (1.0 + 2.0 * np) * (1.0 + 2.0 * m) / (4.0 * m * mp * np * np);
    let approx = l * l * sigma2 / (mp * np);
    Ok(SequentialBound { detailed, approx })
}

/// All bound values for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub universal: f64,
    pub sequential_detailed: f64,
    pub sequential_approx: f64,
    pub exact_crlb: Option<f64>,
}

impl BoundReport {
    pub fn closed_form(l: usize, sigma2: f64, m: usize, mp: usize, np: usize) -> Result<Self> {
        let seq = sequential_bound(l, sigma2, m, mp, np)?;
        Ok(Self {
            universal: universal_bound(l, sigma2, mp, np)?,
            sequential_detailed: seq.detailed,
            sequential_approx: seq.approx,
            exact_crlb: None,
        })
    }
}

/// Real-stacked Jacobian of `vec(H)` with respect to each path's AoA, delay,
/// gain modulus and gain angle, together with the observed-entry mask.
#[derive(Debug, Clone)]
pub struct FisherModel {
    /// `2MN x 4L`. Rows `0..MN` are real parts, `MN..2MN` imaginary parts,
    /// with `vec` stacking columns. Columns come in groups of four per path.
    pub jacobian: Mat<f64>,
    /// One entry per element of `vec(H)`: whether it is observed.
    pub sampling_diag: Vec<bool>,
    pub sigma2: f64,
    m: usize,
    n: usize,
}

impl FisherModel {
    pub fn new(paths: &PathSet, pattern: &SamplingPattern, sigma2: f64) -> Result<Self> {
        let (m, n) = (pattern.m(), pattern.n());
        let mn = m * n;
        let l = paths.len();
        let mut jacobian = Mat::<f64>::zeros(2 * mn, 4 * l);
        for (p_idx, p) in paths.paths().iter().enumerate() {
            let a = steering_unchecked(m, p.aoa);
            let b = steering_unchecked(n, p.delay);
            let modulus = p.gain.norm();
            let phase = c64::new(p.gain.arg().cos(), p.gain.arg().sin());
            for j in 0..n {
                for i in 0..m {
                    // unit-modulus atom times the gain phase
                    let unit = phase * a[i] * b[j].conj();
                    let h = unit * modulus;
                    let d_aoa = h * c64::new(0.0, -2.0 * PI * i as f64);
                    let d_delay = h * c64::new(0.0, 2.0 * PI * j as f64);
                    let d_mod = unit;
                    let d_phase = h * c64::new(0.0, 1.0);
                    let row = j * m + i;
                    for (c, d) in [d_aoa, d_delay, d_mod, d_phase].into_iter().enumerate() {
                        jacobian[(row, 4 * p_idx + c)] = d.re;
                        jacobian[(mn + row, 4 * p_idx + c)] = d.im;
                    }
                }
            }
        }
        let mut sampling_diag = vec![false; mn];
        for &j in pattern.pilot_set() {
            for &i in pattern.antenna_set() {
                sampling_diag[j * m + i] = true;
            }
        }
        Ok(Self {
            jacobian,
            sampling_diag,
            sigma2,
            m,
            n,
        })
    }

    /// `(sigma2 / (2MN)) tr{ J (J^T D J)^{-1} J^T }`.
    pub fn crlb(&self) -> Result<f64> {
        let mn = self.m * self.n;
        let p = self.jacobian.ncols();
        let j = self.jacobian.as_ref();
        let full = j.transpose() * j;
        let mut observed = Mat::<f64>::zeros(p, p);
        for r in 0..2 * mn {
            if !self.sampling_diag[r % mn] {
                continue;
            }
            for a in 0..p {
                let ja = j[(r, a)];
                if ja == 0.0 {
                    continue;
                }
                for b in 0..p {
                    observed[(a, b)] += ja * j[(r, b)];
                }
            }
        }
        let scale: Vec<f64> = (0..p)
            .map(|k| {
                let d = full[(k, k)];
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let g = Mat::from_fn(p, p, |a, b| observed[(a, b)] * scale[a] * scale[b]);
        let f = Mat::from_fn(p, p, |a, b| full[(a, b)] * scale[a] * scale[b]);
        let evd = g
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("fisher eigendecomposition: {e:?}")))?;
        let vals: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        let max = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let min = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !(max > 0.0) || min < SINGULAR_REL_TOL * max {
            return Err(Error::Unidentifiable(format!(
                "fisher information is singular (eigenvalue ratio {:.3e})",
                if max > 0.0 { min / max } else { 0.0 }
            )));
        }
        // tr(G^{-1} F) with G = V diag(vals) V^T
        let v = evd.U();
        let fv = &f * v;
        let mut trace = 0.0;
        for k in 0..p {
            let mut quad = 0.0;
            for a in 0..p {
                quad += v[(a, k)] * fv[(a, k)];
            }
            trace += quad / vals[k];
        }
        Ok(self.sigma2 / (2.0 * mn as f64) * trace)
    }
}

/// Exact per-element CRLB on `H` for the given paths and pattern.
pub fn fisher_crlb(paths: &PathSet, pattern: &SamplingPattern, sigma2: f64) -> Result<f64> {
    positive("sigma2", sigma2)?;
    if pattern.mp() * pattern.np() < 2 * paths.len() {
        return Err(Error::Unidentifiable(format!(
            "{} observations cannot identify {} real parameters",
            2 * pattern.mp() * pattern.np(),
            4 * paths.len()
        )));
    }
    FisherModel::new(paths, pattern, sigma2)?.crlb()
}

/// `L^2 / sum(1 / a_k)`: the floor on `sum(a_k)` for positive `a_k`.
pub fn inverse_sum_floor(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("need at least one value".into()));
    }
    let mut inv = 0.0;
    for &v in values {
        positive("value", v)?;
        inv += 1.0 / v;
    }
    let l = values.len() as f64;
    Ok(l * l / inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_paths, draw_pattern, synth_channel, Path, TrialStreams};
    use approx::assert_relative_eq;

    #[test]
    fn universal_examples() {
        assert_relative_eq!(universal_bound(3, 0.1, 100, 12).unwrap(), 5.0e-4, max_relative = 1e-12);
        assert_relative_eq!(universal_bound(1, 1.0, 1, 2).unwrap(), 1.0, max_relative = 1e-12);
        let a = universal_bound(4, 0.3, 20, 7).unwrap();
        let b = universal_bound(4, 0.3, 40, 7).unwrap();
        assert_relative_eq!(a / b, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn nonpositive_arguments_rejected() {
        assert!(matches!(universal_bound(0, 0.1, 1, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(universal_bound(1, 0.0, 1, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(sequential_bound(1, -1.0, 1, 1, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(sequential_bound(1, 0.1, 0, 1, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sequential_examples() {
        let s = sequential_bound(2, 0.1, 100, 100, 100).unwrap();
        assert_relative_eq!(s.approx, 4.0e-5, max_relative = 1e-12);
        let big = sequential_bound(3, 0.1, 10_000, 50, 10_000).unwrap();
        assert!((big.detailed / big.approx - 1.0).abs() < 1e-3);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let s = TrialStreams::from_u64(5);
        let paths = draw_paths(3, &mut s.stream(0), 0.25).unwrap();
        let (m, n) = (6, 5);
        let model = FisherModel::new(&paths, &SamplingPattern::full(m, n), 1.0).unwrap();
        let h = 1e-6;
        for (p_idx, _) in paths.paths().iter().enumerate() {
            for c in 0..4 {
                let perturb = |sign: f64| {
                    let mut ps: Vec<Path> = paths.paths().to_vec();
                    let p = &mut ps[p_idx];
                    let (r, a) = (p.gain.norm(), p.gain.arg());
                    match c {
                        0 => p.aoa += sign * h,
                        1 => p.delay += sign * h,
                        2 => p.gain = c64::new((a).cos(), a.sin()) * (r + sign * h),
                        _ => p.gain = c64::new((a + sign * h).cos(), (a + sign * h).sin()) * r,
                    }
                    synth_channel(&PathSet::new(ps).unwrap(), m, n).unwrap().into_inner()
                };
                let (hp, hm) = (perturb(1.0), perturb(-1.0));
                let mut err = 0.0f64;
                let mut scale = 0.0f64;
                for j in 0..n {
                    for i in 0..m {
                        let fd = (hp[(i, j)] - hm[(i, j)]) / (2.0 * h);
                        let row = j * m + i;
                        let an = c64::new(
                            model.jacobian[(row, 4 * p_idx + c)],
                            model.jacobian[(m * n + row, 4 * p_idx + c)],
                        );
                        err = err.max((fd - an).norm());
                        scale = scale.max(an.norm());
                    }
                }
                assert!(err <= 1e-6 * scale, "path {p_idx} param {c}: {err} vs {scale}");
            }
        }
    }

    #[test]
    fn full_observation_equals_universal() {
        let s = TrialStreams::from_u64(11);
        let paths = draw_paths(3, &mut s.stream(0), 0.25).unwrap();
        let crlb = fisher_crlb(&paths, &SamplingPattern::full(16, 12), 0.1).unwrap();
        let u = universal_bound(3, 0.1, 16, 12).unwrap();
        assert_relative_eq!(crlb, u, max_relative = 1e-9);
    }

    #[test]
    fn partial_observation_dominates_universal() {
        let s = TrialStreams::from_u64(12);
        let paths = draw_paths(2, &mut s.stream(0), 0.25).unwrap();
        let pattern = draw_pattern(16, 16, 16, 6, &mut s.stream(1)).unwrap();
        let crlb = fisher_crlb(&paths, &pattern, 0.1).unwrap();
        assert!(crlb > 0.0);
    }

    #[test]
    fn too_few_observations_is_unidentifiable() {
        let s = TrialStreams::from_u64(13);
        let paths = draw_paths(3, &mut s.stream(0), 0.25).unwrap();
        let pattern = SamplingPattern::new(8, 8, vec![0, 1], vec![2]).unwrap();
        assert!(matches!(fisher_crlb(&paths, &pattern, 0.1), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn zero_gain_is_unidentifiable() {
        let paths = PathSet::new(vec![
            Path { gain: c64::new(1.0, 0.0), aoa: 0.1, delay: 0.1 },
            Path { gain: c64::new(0.0, 0.0), aoa: 0.6, delay: 0.2 },
        ])
        .unwrap();
        let r = fisher_crlb(&paths, &SamplingPattern::full(8, 8), 0.1);
        assert!(matches!(r, Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn inverse_sum_floor_examples() {
        assert_relative_eq!(inverse_sum_floor(&[2.0, 2.0, 2.0]).unwrap(), 6.0, max_relative = 1e-15);
        assert_relative_eq!(inverse_sum_floor(&[1.0, 3.0]).unwrap(), 3.0, max_relative = 1e-15);
        assert!(inverse_sum_floor(&[]).is_err());
        assert!(inverse_sum_floor(&[1.0, 0.0]).is_err());
    }
}
