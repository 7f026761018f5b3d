//! Toeplitz-structured semidefinite program for the MMV atomic norm.
//!
//! For a `K x J` matrix `X` whose columns share a common harmonic support,
//! the MMV atomic norm equals
//!
//! ```text
//! min 1/2 (tr T(u) + tr W)   s.t.   [[T(u), X], [X^H, W]] >= 0
//! ```
//!
//! where `T(u)` is the Hermitian Toeplitz matrix with first row `u`. Here `X`
//! is only partially known: either a set of its rows or (for the transposed
//! problem) a set of its columns is fixed to data, and the remaining entries
//! are free. The solver is ADMM on the consensus split `Theta = Z`, `Z >= 0`,
//! with the structured block `Theta` updated in closed form and `Z` by an
//! eigenvalue projection.

use faer::{c64, Mat, MatRef};

use crate::linalg;
use crate::{Error, Result};

const REAL_DIAGONAL_TOL: f64 = 1e-10;

/// Hermitian Toeplitz matrix with first row `u`.
///
/// `u[0]` must be real up to a relative tolerance; its imaginary part is
/// dropped so the output is exactly Hermitian.
pub fn toeplitz_from_first_row(u: &[c64]) -> Result<Mat<c64>> {
    if u.is_empty() {
        return Err(Error::InvalidDimension("toeplitz generator is empty".into()));
    }
    let scale = u.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    if u[0].im.abs() > REAL_DIAGONAL_TOL * scale {
        return Err(Error::InvalidArgument(format!(
            "first Toeplitz entry must be real, got imaginary part {:e}",
            u[0].im
        )));
    }
    Ok(toeplitz_unchecked(u))
}

pub(crate) fn toeplitz_unchecked(u: &[c64]) -> Mat<c64> {
    let k = u.len();
    Mat::from_fn(k, k, |j, l| {
        if l > j {
            u[l - j]
        } else if l < j {
            u[j - l].conj()
        } else {
            c64::new(u[0].re, 0.0)
        }
    })
}

/// Adjoint of [`toeplitz_from_first_row`] under the real inner product
/// `Re tr(A^H B)`: entry `d` sums the `d`-th superdiagonal of `a` plus the
/// conjugate of the `d`-th subdiagonal (the main diagonal is counted once).
pub fn toeplitz_adjoint(a: MatRef<'_, c64>) -> Result<Vec<c64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidDimension(format!(
            "toeplitz adjoint needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(toeplitz_adjoint_unchecked(a))
}

fn toeplitz_adjoint_unchecked(a: MatRef<'_, c64>) -> Vec<c64> {
    let k = a.nrows();
    let mut out = vec![c64::new(0.0, 0.0); k];
    for j in 0..k {
        out[0] += a[(j, j)];
        for l in j + 1..k {
            out[l - j] += a[(j, l)] + a[(l, j)].conj();
        }
    }
    out
}

/// Which side of `X` is pinned to data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintAxis {
    /// `X` is `free_dim x mmv_dim`; the listed rows equal the data.
    RowsFixed,
    /// `X` is `mmv_dim x free_dim`; the listed columns equal the data. The
    /// Toeplitz block then acts on the row space of `X^H`.
    ColumnsFixed,
}

/// One instance of the partially observed MMV atomic-norm SDP.
#[derive(Debug, Clone, PartialEq)]
pub struct MmvSdpProblem {
    data: Mat<c64>,
    axis: ConstraintAxis,
    fixed: Vec<usize>,
    free_dim: usize,
    mmv_dim: usize,
}

impl MmvSdpProblem {
    /// `data` holds the rows `fixed_rows` of an unknown `free_dim x J` matrix.
    pub fn rows_fixed(data: Mat<c64>, fixed_rows: Vec<usize>, free_dim: usize) -> Result<Self> {
        let mmv_dim = data.ncols();
        Self::checked(data.nrows(), data, ConstraintAxis::RowsFixed, fixed_rows, free_dim, mmv_dim)
    }

    /// `data` holds the columns `fixed_cols` of an unknown `J x free_dim` matrix.
    pub fn columns_fixed(data: Mat<c64>, fixed_cols: Vec<usize>, free_dim: usize) -> Result<Self> {
        let mmv_dim = data.nrows();
        Self::checked(data.ncols(), data, ConstraintAxis::ColumnsFixed, fixed_cols, free_dim, mmv_dim)
    }

    fn checked(
        fixed_count: usize,
        data: Mat<c64>,
        axis: ConstraintAxis,
        fixed: Vec<usize>,
        free_dim: usize,
        mmv_dim: usize,
    ) -> Result<Self> {
        if free_dim == 0 || mmv_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "SDP dimensions must be positive (free_dim {free_dim}, mmv_dim {mmv_dim})"
            )));
        }
        if fixed.len() != fixed_count {
            return Err(Error::InvalidArgument(format!(
                "{} fixed indices for {} data lines",
                fixed.len(),
                fixed_count
            )));
        }
        if fixed.windows(2).any(|w| w[0] >= w[1]) || fixed.last().is_some_and(|&i| i >= free_dim) {
            return Err(Error::InvalidArgument(
                "fixed indices must be strictly increasing and below free_dim".into(),
            ));
        }
        if data.nrows() * data.ncols() > 0
            && !data.col_iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidArgument("data contains non-finite entries".into()));
        }
        Ok(Self {
            data,
            axis,
            fixed,
            free_dim,
            mmv_dim,
        })
    }

    pub fn data(&self) -> MatRef<'_, c64> {
        self.data.as_ref()
    }

    pub fn axis(&self) -> ConstraintAxis {
        self.axis
    }

    pub fn fixed_indices(&self) -> &[usize] {
        &self.fixed
    }

    pub fn free_dim(&self) -> usize {
        self.free_dim
    }

    pub fn mmv_dim(&self) -> usize {
        self.mmv_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative primal and dual residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial ADMM penalty; adapted by residual balancing.
    pub rho: f64,
    /// Allowed negative eigenvalue of the returned block, relative to
    /// `1 + objective`.
    pub tol_psd: f64,
    /// Keep the per-iteration objective in the diagnostics.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 5000,
            rho: 1.0,
            tol_psd: 1e-4,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config("sdp.tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("sdp.max_iter", "must be positive"));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::config("sdp.rho", format!("must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// Final `||Theta - Z|| / max(||Theta||, ||Z||)`.
    pub primal_residual: f64,
    /// Final `rho ||Z - Z_prev|| / ||Lambda||`.
    pub dual_residual: f64,
    /// Smallest eigenvalue of `[[T(u), X], [X^H, W]]` at the returned point.
    pub min_eigenvalue: f64,
    pub converged: bool,
    pub final_rho: f64,
    /// Per iteration, when requested: objective of the feasible point obtained
    /// by shifting the structured iterate by its most negative eigenvalue.
    /// This upper-bounds the optimum.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmvSdpSolution {
    /// First row of the Toeplitz block; `u[0]` is real.
    pub u: Vec<c64>,
    pub w: Mat<c64>,
    /// Completed matrix; equals the data on the fixed indices.
    pub x: Mat<c64>,
    pub objective: f64,
    pub diagnostics: SolverDiagnostics,
}

impl MmvSdpSolution {
    /// `[[T(u), X], [X^H, W]]` in the row-fixed orientation.
    pub fn block_matrix(&self, axis: ConstraintAxis) -> Mat<c64> {
        let t = toeplitz_unchecked(&self.u);
        let x = match axis {
            ConstraintAxis::RowsFixed => self.x.clone(),
            ConstraintAxis::ColumnsFixed => linalg::adjoint(self.x.as_ref()),
        };
        assemble(t.as_ref(), x.as_ref(), self.w.as_ref())
    }
}

fn assemble(t: MatRef<'_, c64>, x: MatRef<'_, c64>, w: MatRef<'_, c64>) -> Mat<c64> {
    let (k, j) = (t.nrows(), w.nrows());
    Mat::from_fn(k + j, k + j, |r, c| match (r < k, c < k) {
        (true, true) => t[(r, c)],
        (true, false) => x[(r, c - k)],
        (false, true) => x[(c, r - k)].conj(),
        (false, false) => w[(r - k, c - k)],
    })
}

/// Solves the MMV atomic-norm SDP.
///
/// Running out of iterations is not an error: the last iterate is returned
/// with `diagnostics.converged == false`.
pub fn solve_mmv_anm(problem: &MmvSdpProblem, opts: &SolverOptions) -> Result<MmvSdpSolution> {
    opts.validate()?;
    match problem.axis {
        ConstraintAxis::RowsFixed => solve_rows_fixed(
            problem.data.as_ref(),
            &problem.fixed,
            problem.free_dim,
            opts,
        ),
        ConstraintAxis::ColumnsFixed => {
            let data_h = linalg::adjoint(problem.data.as_ref());
            let mut sol = solve_rows_fixed(data_h.as_ref(), &problem.fixed, problem.free_dim, opts)?;
            sol.x = linalg::adjoint(sol.x.as_ref());
            // restore the exact data (conjugation twice is exact, but be explicit)
            for (c, &col) in problem.fixed.iter().enumerate() {
                for r in 0..problem.mmv_dim {
                    sol.x[(r, col)] = problem.data[(r, c)];
                }
            }
            Ok(sol)
        }
    }
}

fn solve_rows_fixed(
    data: MatRef<'_, c64>,
    fixed: &[usize],
    k: usize,
    opts: &SolverOptions,
) -> Result<MmvSdpSolution> {
    let j = data.ncols();
    let n = k + j;
    let data_norm = linalg::frobenius(data);
    if data_norm == 0.0 {
        let mut x = Mat::zeros(k, j);
        clamp_rows(&mut x, data, fixed, 1.0);
        return Ok(MmvSdpSolution {
            u: vec![c64::new(0.0, 0.0); k],
            w: Mat::zeros(j, j),
            x,
            objective: 0.0,
            diagnostics: SolverDiagnostics {
                converged: true,
                final_rho: opts.rho,
                ..Default::default()
            },
        });
    }

    // Work on data scaled so the optimal block has Frobenius norm comparable
    // to the dual certificate (about sqrt(n) / 2); rho = 1 is then sensible.
    let scale = data_norm / (n as f64).sqrt();
    let inv_scale = 1.0 / scale;
    let scaled = Mat::from_fn(data.nrows(), j, |r, c| data[(r, c)] * inv_scale);

    let mut rho = opts.rho;
    let mut z = Mat::<c64>::zeros(n, n);
    let mut lambda = Mat::<c64>::zeros(n, n);
    let mut u = vec![c64::new(0.0, 0.0); k];
    let mut w = Mat::<c64>::zeros(j, j);
    let mut x = Mat::<c64>::zeros(k, j);
    let mut theta = Mat::<c64>::zeros(n, n);
    let mut diag = SolverDiagnostics::default();

    for iter in 1..=opts.max_iter {
        let inv_rho = 1.0 / rho;

        // structured block update against G = Z - Lambda / rho
        let g = Mat::from_fn(n, n, |r, c| z[(r, c)] - lambda[(r, c)] * inv_rho);
        let adj = toeplitz_adjoint_unchecked(g.as_ref().submatrix(0, 0, k, k));
        u[0] = c64::new(adj[0].re / k as f64 - 0.5 * inv_rho, 0.0);
        for d in 1..k {
            u[d] = adj[d] / (2.0 * (k - d) as f64);
        }
        for r in 0..j {
            for c in 0..j {
                let v = (g[(k + r, k + c)] + g[(k + c, k + r)].conj()) * 0.5;
                w[(r, c)] = if r == c { c64::new(v.re - 0.5 * inv_rho, 0.0) } else { v };
            }
        }
        for r in 0..k {
            for c in 0..j {
                x[(r, c)] = (g[(r, k + c)] + g[(k + c, r)].conj()) * 0.5;
            }
        }
        clamp_rows(&mut x, scaled.as_ref(), fixed, 1.0);
        theta = assemble(toeplitz_unchecked(&u).as_ref(), x.as_ref(), w.as_ref());

        // cone projection of Theta + Lambda / rho
        let v = Mat::from_fn(n, n, |r, c| theta[(r, c)] + lambda[(r, c)] * inv_rho);
        let z_new = project_psd(v.as_ref())?;

        let mut primal_sq = 0.0;
        let mut change_sq = 0.0;
        for c in 0..n {
            for r in 0..n {
                let diff = theta[(r, c)] - z_new[(r, c)];
                primal_sq += diff.norm_sqr();
                change_sq += (z_new[(r, c)] - z[(r, c)]).norm_sqr();
                lambda[(r, c)] += diff * rho;
            }
        }
        z = z_new;

        let theta_norm = theta.norm_l2();
        let z_norm = z.norm_l2();
        let lambda_norm = lambda.norm_l2();
        let primal = primal_sq.sqrt() / theta_norm.max(z_norm).max(f64::MIN_POSITIVE);
        let dual = rho * change_sq.sqrt() / lambda_norm.max(f64::MIN_POSITIVE);

        diag.iterations = iter;
        diag.primal_residual = primal;
        diag.dual_residual = dual;
        if opts.record_trace {
            // objective of the feasible point Theta + delta I
            let min_eig = linalg::hermitian_eigenvalues(theta.as_ref())?[0];
            let shift = (-min_eig).max(0.0) * 0.5 * n as f64;
            diag.objective_trace.push(scale * (objective_of(&u, w.as_ref()) + shift));
        }
        if primal <= opts.tol && dual <= opts.tol {
            diag.converged = true;
            break;
        }

        if primal > 10.0 * dual {
            rho *= 2.0;
        } else if dual > 10.0 * primal {
            rho *= 0.5;
        }
    }
    diag.final_rho = rho;

    // undo the scaling; fixed rows come straight from the caller's data
    for e in u.iter_mut() {
        *e *= scale;
    }
    let w = Mat::from_fn(j, j, |r, c| w[(r, c)] * scale);
    let mut x = Mat::from_fn(k, j, |r, c| x[(r, c)] * scale);
    clamp_rows(&mut x, data, fixed, 1.0);
    let objective = objective_of(&u, w.as_ref());

    let block = assemble(toeplitz_unchecked(&u).as_ref(), x.as_ref(), w.as_ref());
    diag.min_eigenvalue = linalg::hermitian_eigenvalues(block.as_ref())?
        .first()
        .copied()
        .unwrap_or(0.0);
    drop(theta);

    Ok(MmvSdpSolution {
        u,
        w,
        x,
        objective,
        diagnostics: diag,
    })
}

fn objective_of(u: &[c64], w: MatRef<'_, c64>) -> f64 {
    let tr_w: f64 = (0..w.nrows()).map(|i| w[(i, i)].re).sum();
    0.5 * (u.len() as f64 * u[0].re + tr_w)
}

fn clamp_rows(x: &mut Mat<c64>, data: MatRef<'_, c64>, fixed: &[usize], factor: f64) {
    for (r, &row) in fixed.iter().enumerate() {
        for c in 0..x.ncols() {
            x[(row, c)] = data[(r, c)] * factor;
        }
    }
}

/// Nearest positive semidefinite matrix in Frobenius norm.
fn project_psd(v: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let (vals, vecs) = linalg::hermitian_eigen(v)?;
    let n = v.nrows();
    let positive: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.0).collect();
    if positive.is_empty() {
        return Ok(Mat::zeros(n, n));
    }
    let factor = Mat::from_fn(n, positive.len(), |r, c| {
        let i = positive[c];
        vecs[(r, i)] * vals[i].sqrt()
    });
    Ok(&factor * factor.adjoint())
}
