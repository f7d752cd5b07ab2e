//! Proximal maps of the two regularizers, the max-norm projection, and the
//! dual norms used by the gradient checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};

/// Regularization strength `gamma >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegWeight {
    gamma: f64,
}

impl RegWeight {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::pre(format!("regularization weight must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `{L : max_ij |L_ij| <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxNormBall {
    radius: f64,
}

impl MaxNormBall {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::pre(format!("max-norm radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, values: &[f64], slack: f64) -> bool {
        values.iter().all(|x| x.abs() <= self.radius + slack)
    }

    pub(crate) fn clamp_in_place(&self, values: &mut [f64]) {
        let r = self.radius;
        for x in values {
            *x = x.clamp(-r, r);
        }
    }
}

fn check_weight(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::pre(format!("prox weight must be finite and >= 0, got {t}")))
    }
}

#[inline]
pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    let shrunk = x.abs() - t;
    if shrunk > 0.0 {
        shrunk.copysign(x)
    } else {
        0.0
    }
}

/// Soft-thresholding, the prox of `t * ||.||_1`.
pub fn prox_l1(v: &DenseVector, t: f64) -> Result<DenseVector> {
    check_weight(t)?;
    Ok(v.map(|x| soft_threshold(x, t)))
}

pub(crate) fn prox_l1_in_place(v: &mut [f64], t: f64) {
    for x in v {
        *x = soft_threshold(*x, t);
    }
}

/// Singular value thresholding, the prox of `t * ||.||_nuc`.
pub fn prox_nuclear(m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    check_weight(t)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(m.clone());
    }
    if t == 0.0 {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("nuclear prox of non-finite input".into()));
        }
        return Ok(m.clone());
    }
    // Singular value shrinkage is the spectral function
    // M -> M V diag(max(0, 1 - t / sigma)) V^T of the Gram matrix, which is
    // cheaper than a full SVD.
    if m.nrows() < m.ncols() {
        return Ok(prox_nuclear(&m.transpose(), t)?.transpose());
    }
    let (lambda, v) = linalg::symmetric_eigen(&m.tr_mul(m))?;
    let kept: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] > t * t).collect();
    if kept.is_empty() {
        return Ok(DenseMatrix::zeros(m.nrows(), m.ncols()));
    }
    let vk = v.select_columns(&kept);
    let mut scaled = m * &vk;
    for (c, &i) in kept.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 - t / lambda[i].sqrt());
    }
    Ok(scaled * vk.transpose())
}

/// Entrywise clamp; the Euclidean projection onto the max-norm ball.
pub fn project_maxnorm(m: &DenseMatrix, ball: MaxNormBall) -> DenseMatrix {
    let mut out = m.clone();
    ball.clamp_in_place(out.as_mut_slice());
    out
}

/// Dual of the l1 norm.
pub fn dual_norm_linf(v: &DenseVector) -> f64 {
    linalg::max_abs(v.as_slice())
}

/// Dual of the nuclear norm.
pub fn dual_norm_spectral(m: &DenseMatrix) -> Result<f64> {
    linalg::spectral_norm(m)
}
