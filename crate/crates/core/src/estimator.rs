//! Two-step sequential MMV atomic-norm channel estimation.
//!
//! Step 1 treats the `N_p` observed columns as multiple measurement vectors
//! of one harmonic sequence over the antenna index and completes the
//! unobserved antennas, giving `H1_hat` (`M x N_p`). Step 2 treats the `M`
//! rows of the channel as multiple measurement vectors over the subcarrier
//! index and extrapolates from the pilot columns of `H1_hat` to all `N`
//! subcarriers. Each step keeps only the `L` dominant harmonics of its
//! Toeplitz block and refits the MMV coefficients by least squares, so AoAs
//! and delays are estimated independently and never paired.

use std::time::{Duration, Instant};

use faer::{c64, Mat, MatRef};

use crate::harmonic::{self, ls_refit, vandermonde_decompose_with, HarmonicModel};
use crate::model::Observation;
use crate::sdp::{solve_mmv_anm, MmvSdpProblem, SolverDiagnostics, SolverOptions};
use crate::{linalg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub sdp: SolverOptions,
    /// Tolerance passed to the Vandermonde step; see
    /// [`harmonic::vandermonde_decompose_with`].
    pub psd_tol: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            sdp: SolverOptions::default(),
            psd_tol: harmonic::DEFAULT_PSD_TOL,
        }
    }
}

/// How one step ended.
#[derive(Debug, Clone, PartialEq)]
pub enum StepStatus {
    Solved,
    /// The data was identically zero; the step returned zero.
    ZeroInput,
    /// No dominant `L`-dimensional subspace; the step returned zero.
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub status: StepStatus,
    /// Recovered frequencies (empty unless solved).
    pub frequencies: Vec<f64>,
    pub weights: Vec<f64>,
    pub solver: SolverDiagnostics,
    /// Set when `T(u)` was more indefinite than `psd_tol` and the harmonic
    /// step ran without the check (typically after a non-converged solve).
    pub psd_relaxed: bool,
    pub wall: Duration,
}

impl StepReport {
    pub fn converged(&self) -> bool {
        match self.status {
            StepStatus::ZeroInput => true,
            _ => self.solver.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct H1Estimate {
    /// `M x N_p`.
    pub h1_hat: Mat<c64>,
    pub aoas_hat: Vec<f64>,
    pub step: StepReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// `M x N`.
    pub h_hat: Mat<c64>,
    /// `M x N_p`.
    pub h1_hat: Mat<c64>,
    pub aoas_hat: Vec<f64>,
    pub delays_hat: Vec<f64>,
    pub step1: StepReport,
    pub step2: StepReport,
}

impl EstimateReport {
    pub fn converged(&self) -> bool {
        self.step1.converged() && self.step2.converged()
    }

    pub fn wall(&self) -> Duration {
        self.step1.wall + self.step2.wall
    }
}

/// Step 1: estimate `H1 = H S_{N_p}^T` from the observation.
pub fn estimate_h1(obs: &Observation, l: usize, opts: &EstimatorOptions) -> Result<H1Estimate> {
    let pattern = &obs.pattern;
    let (h1_hat, step) = recover_rows(obs.y.as_ref(), pattern.antenna_set(), pattern.m(), l, opts)?;
    Ok(H1Estimate {
        h1_hat,
        aoas_hat: step.frequencies.clone(),
        step,
    })
}

/// Both steps; returns the full `M x N` estimate with per-step diagnostics.
pub fn estimate_channel(obs: &Observation, l: usize, opts: &EstimatorOptions) -> Result<EstimateReport> {
    let step1 = estimate_h1(obs, l, opts)?;
    let pattern = &obs.pattern;
    // X S^T = H1_hat is the row-fixed problem for X^H with the pilot rows pinned
    let h1_h = linalg::adjoint(step1.h1_hat.as_ref());
    let (h_hat_h, step2) = recover_rows(h1_h.as_ref(), pattern.pilot_set(), pattern.n(), l, opts)?;
    Ok(EstimateReport {
        h_hat: linalg::adjoint(h_hat_h.as_ref()),
        h1_hat: step1.h1_hat,
        aoas_hat: step1.aoas_hat,
        delays_hat: step2.frequencies.clone(),
        step1: step1.step,
        step2,
    })
}

/// One MMV step: `data` holds rows `rows` of an unknown `k x J` matrix that
/// is a combination of `l` steering vectors. Returns the completed matrix.
fn recover_rows(
    data: MatRef<'_, c64>,
    rows: &[usize],
    k: usize,
    l: usize,
    opts: &EstimatorOptions,
) -> Result<(Mat<c64>, StepReport)> {
    if l == 0 || l >= k {
        return Err(Error::InvalidArgument(format!(
            "path count must satisfy 1 <= L < {k}, got {l}"
        )));
    }
    let start = Instant::now();
    let j = data.ncols();
    let mut report = StepReport {
        status: StepStatus::Solved,
        frequencies: Vec::new(),
        weights: Vec::new(),
        solver: SolverDiagnostics::default(),
        psd_relaxed: false,
        wall: Duration::ZERO,
    };
    if linalg::frobenius(data) == 0.0 {
        report.status = StepStatus::ZeroInput;
        report.solver.converged = true;
        report.wall = start.elapsed();
        return Ok((Mat::zeros(k, j), report));
    }

    let problem = MmvSdpProblem::rows_fixed(data.to_owned(), rows.to_vec(), k)?;
    let solution = solve_mmv_anm(&problem, &opts.sdp)?;
    report.solver = solution.diagnostics;

    let model: HarmonicModel = match vandermonde_decompose_with(&solution.u, l, opts.psd_tol) {
        Ok(model) => model,
        Err(Error::Indefinite { .. }) => {
            report.psd_relaxed = true;
            match vandermonde_decompose_with(&solution.u, l, f64::INFINITY) {
                Ok(model) => model,
                Err(Error::DegenerateSubspace(why)) => return Ok(degenerate(k, j, why, report, start)),
                Err(e) => return Err(e),
            }
        }
        Err(Error::DegenerateSubspace(why)) => return Ok(degenerate(k, j, why, report, start)),
        Err(e) => return Err(e),
    };

    let refit = ls_refit(data, &model.frequencies, k, Some(rows))?;
    report.frequencies = model.frequencies;
    report.weights = model.weights;
    report.wall = start.elapsed();
    Ok((refit.reconstruction, report))
}

fn degenerate(k: usize, j: usize, why: String, mut report: StepReport, start: Instant) -> (Mat<c64>, StepReport) {
    report.status = StepStatus::Degenerate(why);
    report.wall = start.elapsed();
    (Mat::zeros(k, j), report)
}
