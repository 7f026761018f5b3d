//! Dominant Vandermonde components of a PSD Toeplitz matrix and the
//! least-squares coefficient refit that follows them.
//!
//! A PSD Toeplitz matrix of rank `r < K` has a unique decomposition
//! `T = sum_k d_k f(phi_k) f(phi_k)^H` with `d_k > 0`. The frequencies of the
//! `L` dominant components are read off the top-`L` eigenvector block by
//! rotational invariance: shifting the rows of a steering vector by one
//! multiplies it by `exp(-i 2 pi phi)`, so the subspace spanned by `L`
//! steering vectors satisfies `U[1..] = U[..K-1] Psi`, and the eigenvalues of
//! `Psi` are `exp(-i 2 pi phi_k)`.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use faer::{c64, Mat, MatRef};

use crate::model::{steering_matrix, wrap_distance};
use crate::sdp::toeplitz_unchecked;
use crate::{linalg, Error, Result};

/// Singular values below this fraction of the largest are dropped in refits.
pub const PINV_REL_THRESHOLD: f64 = 1e-10;

/// Default allowed negative eigenvalue of `T(u)`, relative to `||u||`.
pub const DEFAULT_PSD_TOL: f64 = 1e-3;

const GAP_REL_TOL: f64 = 1e-9;
const DISTINCT_TOL: f64 = 1e-9;

/// `L` harmonics with nonnegative weights, ordered by decreasing weight
/// (ties broken towards the lower frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicModel {
    pub frequencies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HarmonicModel {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// First row of `sum_k d_k f_K(phi_k) f_K(phi_k)^H`.
    pub fn toeplitz_row(&self, k: usize) -> Vec<c64> {
        (0..k)
            .map(|d| {
                self.frequencies
                    .iter()
                    .zip(&self.weights)
                    .map(|(&f, &w)| c64::from_polar(w, TAU * (f * d as f64).fract()))
                    .sum()
            })
            .collect()
    }
}

/// The `l` dominant harmonics of `T(u)` with the default PSD tolerance.
pub fn vandermonde_decompose(u: &[c64], l: usize) -> Result<HarmonicModel> {
    vandermonde_decompose_with(u, l, DEFAULT_PSD_TOL)
}

/// Like [`vandermonde_decompose`], rejecting `T(u)` whose smallest eigenvalue
/// is below `-psd_tol * ||u||`.
pub fn vandermonde_decompose_with(u: &[c64], l: usize, psd_tol: f64) -> Result<HarmonicModel> {
    let k = u.len();
    if l == 0 || l >= k {
        return Err(Error::InvalidArgument(format!(
            "model order must satisfy 1 <= L < K, got L={l}, K={k}"
        )));
    }
    let t = toeplitz_unchecked(u);
    let (mut vals, vecs) = linalg::hermitian_eigen(t.as_ref())?;
    // descending
    vals.reverse();
    let top = vals[0];
    let u_norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let min = vals[k - 1];
    if min < -psd_tol * u_norm {
        return Err(Error::Indefinite {
            min_eig: min,
            allowed: -psd_tol * u_norm,
        });
    }
    if !(top > 0.0) {
        return Err(Error::DegenerateSubspace("Toeplitz matrix has no positive spectrum".into()));
    }
    if vals[l - 1] - vals[l] <= GAP_REL_TOL * top {
        return Err(Error::DegenerateSubspace(format!(
            "eigenvalues {l} and {} coincide ({:e} vs {:e})",
            l + 1,
            vals[l - 1],
            vals[l]
        )));
    }

    // top-L eigenvectors are the last L columns of the ascending decomposition
    let signal = Mat::from_fn(k, l, |r, c| vecs[(r, k - 1 - c)]);
    let upper = signal.as_ref().submatrix(0, 0, k - 1, l);
    let lower = signal.as_ref().submatrix(1, 0, k - 1, l);
    let psi = linalg::pinv_thresholded(upper, PINV_REL_THRESHOLD)? * lower;
    let roots = psi
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("rotation operator eigenvalues: {e:?}")))?;
    let mut freqs: Vec<f64> = roots
        .iter()
        .map(|z| {
            let f = (-z.arg() / TAU).rem_euclid(1.0);
            if f >= 1.0 {
                0.0
            } else {
                f
            }
        })
        .collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            if wrap_distance(freqs[i], freqs[j]) <= DISTINCT_TOL {
                return Err(Error::DegenerateSubspace(format!(
                    "recovered frequencies {} and {} coincide",
                    freqs[i], freqs[j]
                )));
            }
        }
    }

    let weights = toeplitz_weights(u, &freqs)?;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(Ordering::Equal)
            .then(freqs[a].partial_cmp(&freqs[b]).unwrap_or(Ordering::Equal))
    });
    Ok(HarmonicModel {
        frequencies: order.iter().map(|&i| freqs[i]).collect(),
        weights: order.iter().map(|&i| weights[i]).collect(),
    })
}

/// Nonnegative `d` minimizing `||T(u) - sum_k d_k f(phi_k) f(phi_k)^H||_F`.
///
/// Both sides are Toeplitz, so the Frobenius norm reduces to a weighted fit
/// of the first row with weight `K` on lag 0 and `2 (K - d)` on lag `d`.
fn toeplitz_weights(u: &[c64], freqs: &[f64]) -> Result<Vec<f64>> {
    let k = u.len();
    let l = freqs.len();
    let rows = 2 * k - 1;
    let mut a = Mat::<f64>::zeros(rows, l);
    let mut b = vec![0.0; rows];
    let lag_weight = |d: usize| if d == 0 { k as f64 } else { 2.0 * (k - d) as f64 };
    b[0] = lag_weight(0).sqrt() * u[0].re;
    for (c, &f) in freqs.iter().enumerate() {
        a[(0, c)] = lag_weight(0).sqrt();
        for d in 1..k {
            let s = lag_weight(d).sqrt();
            let z = c64::from_polar(1.0, TAU * (f * d as f64).fract());
            a[(2 * d - 1, c)] = s * z.re;
            a[(2 * d, c)] = s * z.im;
        }
    }
    for d in 1..k {
        let s = lag_weight(d).sqrt();
        b[2 * d - 1] = s * u[d].re;
        b[2 * d] = s * u[d].im;
    }
    nnls(a.as_ref(), &b)
}

/// Lawson-Hanson active-set nonnegative least squares.
pub(crate) fn nnls(a: MatRef<'_, f64>, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let scale = (0..n).map(|j| a.col(j).norm_l2()).fold(0.0, f64::max).max(1.0)
        * b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-12 * scale;

    let gradient = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for j in 0..n {
            for i in 0..m {
                r[i] -= a[(i, j)] * x[j];
            }
        }
        (0..n).map(|j| (0..m).map(|i| a[(i, j)] * r[i]).sum()).collect()
    };
    let solve_passive = |passive: &[bool]| -> Result<Vec<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = Mat::<c64>::from_fn(m, idx.len(), |i, c| c64::new(a[(i, idx[c])], 0.0));
        let pinv = linalg::pinv_thresholded(sub.as_ref(), 1e-13)?;
        let mut z = vec![0.0; n];
        for (c, &j) in idx.iter().enumerate() {
            z[j] = (0..m).map(|i| pinv[(c, i)].re * b[i]).sum();
        }
        Ok(z)
    };

    for _ in 0..3 * n + 10 {
        let w = gradient(&x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&p, &q| w[p].partial_cmp(&w[q]).unwrap_or(Ordering::Equal));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive)?;
            if (0..n).all(|i| !passive[i] || z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in 0..n {
                if passive[i] && z[i] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[i]));
                }
            }
            for i in 0..n {
                x[i] += alpha * (z[i] - x[i]);
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    Ok(x.into_iter().map(|v| v.max(0.0)).collect())
}

/// Least-squares coefficients and the full-length reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    /// `L x J`; row `l` is `x_l^H`.
    pub coefficients: Mat<c64>,
    /// `K x J` matrix `sum_l f_K(phi_l) x_l^H`.
    pub reconstruction: Mat<c64>,
}

/// Fits `data` (rows `row_selector` of a `k`-row matrix, or all `k` rows)
/// with `L` steering vectors at `frequencies`, using a thresholded
/// pseudoinverse so near-duplicate frequencies stay bounded.
pub fn ls_refit(
    data: MatRef<'_, c64>,
    frequencies: &[f64],
    k: usize,
    row_selector: Option<&[usize]>,
) -> Result<Refit> {
    if frequencies.is_empty() {
        return Err(Error::InvalidArgument("no frequencies to refit".into()));
    }
    let observed = row_selector.map_or(k, |r| r.len());
    if data.nrows() != observed {
        return Err(Error::InvalidDimension(format!(
            "data has {} rows but {observed} are selected",
            data.nrows()
        )));
    }
    if let Some(rows) = row_selector {
        if rows.iter().any(|&r| r >= k) {
            return Err(Error::InvalidArgument(format!("row selector exceeds steering length {k}")));
        }
    }
    let design = steering_matrix(k, frequencies, row_selector);
    let coefficients = linalg::pinv_thresholded(design.as_ref(), PINV_REL_THRESHOLD)? * data;
    let full = steering_matrix(k, frequencies, None);
    let reconstruction = &full * &coefficients;
    Ok(Refit {
        coefficients,
        reconstruction,
    })
}
