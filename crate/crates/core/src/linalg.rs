//! Thin helpers over `faer` for the dense complex algebra used throughout.

use faer::{c64, Mat, MatRef, Side};

use crate::{Error, Result};

/// Eigendecomposition of a Hermitian matrix: eigenvalues in nondecreasing
/// order and the matching orthonormal eigenvectors as columns.
///
/// Only the lower triangle of `a` is read.
pub fn hermitian_eigen(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigendecomposition: {e:?}")))?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigenvalues of a Hermitian matrix in nondecreasing order.
pub fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigenvalues: {e:?}")))
}

/// Moore-Penrose pseudoinverse with singular values below
/// `rel_threshold * sigma_max` treated as zero.
pub fn pinv_thresholded(a: MatRef<'_, c64>, rel_threshold: f64) -> Result<Mat<c64>> {
    let (rows, cols) = (a.nrows(), a.ncols());
    if rows == 0 || cols == 0 {
        return Ok(Mat::zeros(cols, rows));
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = s.iter().fold(0.0f64, |m, z| m.max(z.re));
    let cutoff = rel_threshold * smax;
    let (u, v) = (svd.U(), svd.V());
    let rank = s.nrows();
    let mut out = Mat::<c64>::zeros(cols, rows);
    for k in 0..rank {
        let sk = s[k].re;
        if sk <= cutoff || sk == 0.0 {
            continue;
        }
        let inv = 1.0 / sk;
        for j in 0..rows {
            let uc = u[(j, k)].conj() * inv;
            for i in 0..cols {
                out[(i, j)] += v[(i, k)] * uc;
            }
        }
    }
    Ok(out)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: MatRef<'_, c64>) -> Mat<c64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

/// `A^H` as an owned matrix.
pub fn adjoint(a: MatRef<'_, c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

/// Keeps the rows of `a` listed in `rows`, in order.
pub fn select_rows(a: MatRef<'_, c64>, rows: &[usize]) -> Mat<c64> {
    Mat::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Keeps the rows in `rows` and the columns in `cols`.
pub fn select(a: MatRef<'_, c64>, rows: &[usize], cols: &[usize]) -> Mat<c64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_deficient_matrix_satisfies_penrose_identity() {
        // columns 0 and 1 are identical
        let a = Mat::from_fn(4, 3, |i, j| {
            let j = if j == 1 { 0 } else { j };
            c64::new((i + 1) as f64, (i * j) as f64 - 0.5)
        });
        let p = pinv_thresholded(a.as_ref(), 1e-10).unwrap();
        let apa = &a * &p * &a;
        assert!((&apa - &a).norm_l2() < 1e-10 * a.norm_l2());
        let pap = &p * &a * &p;
        assert!((&pap - &p).norm_l2() < 1e-10 * p.norm_l2());
    }

    #[test]
    fn eigen_reconstructs_hermitian_input() {
        let a = Mat::from_fn(5, 5, |i, j| c64::new((i + j) as f64, i as f64 - j as f64));
        let (vals, vecs) = hermitian_eigen(a.as_ref()).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = Mat::from_fn(5, 5, |i, j| if i == j { c64::new(vals[i], 0.0) } else { c64::new(0.0, 0.0) });
        let back = &vecs * &d * vecs.adjoint();
        assert!((&back - &a).norm_l2() < 1e-10 * a.norm_l2());
    }
}
