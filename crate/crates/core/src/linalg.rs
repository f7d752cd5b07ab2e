//! Dense kernels shared by the estimators and checkers.
//!
//! Storage types are nalgebra's; SVDs are delegated to faer, which is
//! several times faster on the square matrices the PCA solver factors every
//! iteration. faer is pinned to sequential execution so factorizations are
//! bit-identical regardless of the surrounding thread pool.

use std::sync::Once;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Relative cutoff below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-12;

static SEQUENTIAL: Once = Once::new();

fn to_faer(m: &DenseMatrix) -> faer::Mat<f64> {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DenseMatrix {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn diagnostics(m: &DenseMatrix) -> String {
    let finite = m.iter().all(|x| x.is_finite());
    let max_abs = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    format!(
        "{}x{} matrix, all finite: {finite}, max |entry| = {max_abs:e}",
        m.nrows(),
        m.ncols()
    )
}

/// Full singular value decomposition `m = u * diag(s) * v^T`, singular
/// values sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: DenseVector,
    pub v: DenseMatrix,
}

impl Svd {
    /// Numerical rank with the crate-wide relative tolerance.
    pub fn rank(&self) -> usize {
        let top = self.s.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&x| x > RANK_TOL * top).count()
    }
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!(
            "SVD of non-finite input ({})",
            diagnostics(m)
        )));
    }
    let f = to_faer(m);
    let dec = f
        .svd()
        .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?} ({})", diagnostics(m))))?;
    let s = dec.S().column_vector();
    Ok(Svd {
        u: from_faer(dec.U()),
        s: DVector::from_fn(s.nrows(), |i, _| s[i]),
        v: from_faer(dec.V()),
    })
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending. Only
/// the lower triangle is read.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<(DenseVector, DenseMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::pre("symmetric_eigen needs a square matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!(
            "eigendecomposition of non-finite input ({})",
            diagnostics(m)
        )));
    }
    let dec = to_faer(m).self_adjoint_eigen(faer::Side::Lower).map_err(|e| {
        Error::Numeric(format!("eigendecomposition did not converge: {e:?} ({})", diagnostics(m)))
    })?;
    let s = dec.S().column_vector();
    Ok((DVector::from_fn(s.nrows(), |i, _| s[i]), from_faer(dec.U())))
}

pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!(
            "singular values of non-finite input ({})",
            diagnostics(m)
        )));
    }
    to_faer(m)
        .singular_values()
        .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?} ({})", diagnostics(m))))
}

pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(neumaier_sum(singular_values(m)?))
}

/// Compensated summation; the result does not depend on how the inputs were
/// produced, only on their order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn l1_norm(v: &[f64]) -> f64 {
    neumaier_sum(v.iter().map(|x| x.abs()))
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Largest eigenvalue of `x^T x` (the squared spectral norm of `x`) by power
/// iteration from a fixed start vector.
pub fn gram_top_eigenvalue(x: &DenseMatrix, rel_tol: f64, max_iters: usize) -> Result<f64> {
    let d = x.ncols();
    if d == 0 || x.nrows() == 0 {
        return Ok(0.0);
    }
    // Fixed, non-degenerate start: not orthogonal to generic top vectors.
    let mut v = DVector::from_fn(d, |i, _| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let xv = x * &v;
        let w = x.transpose() * xv;
        let norm = w.norm();
        if !norm.is_finite() {
            return Err(Error::Numeric("power iteration produced non-finite values".into()));
        }
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = norm;
        v = w / norm;
        if (next - lambda).abs() <= rel_tol * next {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Column-major flattening of a matrix.
pub fn flatten(m: &DenseMatrix) -> DenseVector {
    DVector::from_column_slice(m.as_slice())
}

pub fn unflatten(v: &DenseVector, rows: usize, cols: usize) -> DenseMatrix {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Orthonormal basis of the orthogonal complement of the first `rank`
/// columns of an orthogonal matrix.
pub fn complement_columns(full: &DenseMatrix, rank: usize) -> DenseMatrix {
    full.columns(rank, full.ncols() - rank).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn svd_reconstructs() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -3.0, 0.5, 4.0, 1.0]);
        let dec = svd(&m).unwrap();
        let k = dec.s.len();
        let recon = dec.u.columns(0, k) * DMatrix::from_diagonal(&dec.s) * dec.v.columns(0, k).transpose();
        assert_relative_eq!(recon, m, epsilon = 1e-12);
        assert!(dec.s[0] >= dec.s[1]);
        assert_eq!(dec.rank(), 2);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let m = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let top = spectral_norm(&m).unwrap();
        let lam = gram_top_eigenvalue(&m, 1e-14, 10_000).unwrap();
        assert_relative_eq!(lam, top * top, max_relative = 1e-9);
    }

    #[test]
    fn non_finite_input_is_numeric_error() {
        let m = DMatrix::from_row_slice(1, 2, &[f64::NAN, 1.0]);
        assert!(matches!(svd(&m), Err(Error::Numeric(_))));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(vals), 2.0);
    }
}
