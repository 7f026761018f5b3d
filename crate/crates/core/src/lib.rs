//! Sequential MMV atomic-norm-minimization channel estimation for wideband
//! massive MIMO.
//!
//! The channel `H = sum_l c_l f_M(theta_l) f_N(tau_l)^H` is observed on a
//! random subset of antennas and pilot subcarriers. The estimator recovers it
//! in two one-dimensional steps: an MMV atomic-norm problem over the antenna
//! (angle) domain, followed by a second one over the subcarrier (delay)
//! domain. Each step solves a Toeplitz-structured semidefinite program,
//! extracts the `L` dominant harmonics from the Toeplitz block and refits
//! the MMV coefficients by least squares.
//!
//! Modules:
//! - [`model`]: channel synthesis, random draws and noisy observations
//! - [`sdp`]: ADMM solver for the Toeplitz MMV atomic-norm SDP
//! - [`harmonic`]: dominant Vandermonde components and least-squares refits
//! - [`estimator`]: the two-step pipeline
//! - [`bounds`]: closed-form MSE bounds and the exact Fisher/CRLB trace
//! - [`baselines`]: gridded BPDN and LMMSE estimators

pub mod baselines;
pub mod bounds;
mod error;
pub mod estimator;
pub mod harmonic;
pub mod linalg;
pub mod model;
pub mod sdp;

pub use error::{Error, Result};
pub use faer::{c64, Mat};
