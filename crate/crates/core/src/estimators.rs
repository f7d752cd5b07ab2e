//! The two Huber-loss estimators with their default regularization
//! constants, and the error metrics used to score them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::huber::{grad_of_slice, loss_of_slice, HuberParams};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::prox::{project_maxnorm, MaxNormBall};
use crate::solver::{
    certify_against_reference, solve_fista, solve_split, CompositeProblem, Regularizer, SolveResult, SolverConfig,
};

/// Huber parameter of the regression loss.
pub const REGRESSION_H: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTruth {
    pub beta: DenseVector,
    pub support: Vec<usize>,
}

impl RegressionTruth {
    pub fn k(&self) -> usize {
        self.support.len()
    }
}

/// Design assumptions: RE constant, column-norm bound, well-spread set size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignProps {
    pub lambda: f64,
    pub nu: f64,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub x: DenseMatrix,
    pub y: DenseVector,
    pub truth: Option<RegressionTruth>,
    pub design: Option<DesignProps>,
}

impl RegressionProblem {
    pub fn new(x: DenseMatrix, y: DenseVector) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::pre(format!("design has {} rows but response has {} entries", x.nrows(), y.len())));
        }
        Ok(Self { x, y, truth: None, design: None })
    }

    pub fn with_truth(mut self, beta: DenseVector, support: Vec<usize>) -> Result<Self> {
        let d = self.x.ncols();
        if beta.len() != d {
            return Err(Error::pre(format!("truth has length {}, design has {d} columns", beta.len())));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() || sorted.iter().any(|&j| j >= d) {
            return Err(Error::pre("support must be distinct in-range indices"));
        }
        if (0..d).any(|j| beta[j] != 0.0 && sorted.binary_search(&j).is_err()) {
            return Err(Error::pre("truth has non-zero entries off its support"));
        }
        self.truth = Some(RegressionTruth { beta, support: sorted });
        Ok(self)
    }

    pub fn with_design(mut self, design: DesignProps) -> Self {
        self.design = Some(design);
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn truth(&self) -> Result<&RegressionTruth> {
        self.truth.as_ref().ok_or_else(|| Error::pre("problem carries no ground truth"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaTruth {
    pub l: DenseMatrix,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProblem {
    pub y: DenseMatrix,
    pub rho_over_n: f64,
    pub zeta: f64,
    pub truth: Option<PcaTruth>,
}

impl PcaProblem {
    pub fn new(y: DenseMatrix, rho_over_n: f64, zeta: f64) -> Result<Self> {
        if y.nrows() != y.ncols() {
            return Err(Error::pre(format!("observation must be square, got {}x{}", y.nrows(), y.ncols())));
        }
        if !(rho_over_n > 0.0) || !rho_over_n.is_finite() {
            return Err(Error::pre(format!("rho/n must be positive, got {rho_over_n}")));
        }
        if !(zeta >= 0.0) || !zeta.is_finite() {
            return Err(Error::pre(format!("zeta must be non-negative, got {zeta}")));
        }
        Ok(Self { y, rho_over_n, zeta, truth: None })
    }

    pub fn with_truth(mut self, l: DenseMatrix, rank: usize) -> Result<Self> {
        if l.shape() != self.y.shape() {
            return Err(Error::pre("truth and observation shapes differ"));
        }
        if linalg::max_abs(l.as_slice()) > self.rho_over_n + 1e-12 {
            return Err(Error::pre("truth exceeds the spikiness bound"));
        }
        let found = linalg::svd(&l)?.rank();
        if found > rank {
            return Err(Error::pre(format!("truth has rank {found}, declared {rank}")));
        }
        self.truth = Some(PcaTruth { l, rank });
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn truth(&self) -> Result<&PcaTruth> {
        self.truth.as_ref().ok_or_else(|| Error::pre("problem carries no ground truth"))
    }

    pub fn ball(&self) -> MaxNormBall {
        MaxNormBall::new(self.rho_over_n).expect("validated on construction")
    }
}

/// Regularization constants. The defaults are the ones in the error
/// analysis, which are far larger than needed in practice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConstants {
    pub gamma_scale: f64,
    pub huber_h_override: Option<f64>,
    /// Replaces the formula for `gamma` entirely (zero allowed).
    pub gamma_override: Option<f64>,
}

impl Default for EstimatorConstants {
    fn default() -> Self {
        Self { gamma_scale: 100.0, huber_h_override: None, gamma_override: None }
    }
}

impl EstimatorConstants {
    pub fn with_scale(gamma_scale: f64) -> Self {
        Self { gamma_scale, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_scale > 0.0) || !self.gamma_scale.is_finite() {
            return Err(Error::pre(format!("gamma_scale must be positive, got {}", self.gamma_scale)));
        }
        if let Some(h) = self.huber_h_override {
            HuberParams::new(h)?;
        }
        if let Some(g) = self.gamma_override {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::pre(format!("gamma override must be finite and >= 0, got {g}")));
            }
        }
        Ok(())
    }
}

pub fn regression_gamma(p: &RegressionProblem, c: &EstimatorConstants) -> f64 {
    c.gamma_override
        .unwrap_or_else(|| c.gamma_scale * ((p.n() as f64) * (p.d() as f64).ln()).sqrt())
}

pub fn regression_huber(c: &EstimatorConstants) -> Result<HuberParams> {
    HuberParams::new(c.huber_h_override.unwrap_or(REGRESSION_H))
}

pub fn pca_huber(p: &PcaProblem, c: &EstimatorConstants) -> Result<HuberParams> {
    HuberParams::new(c.huber_h_override.unwrap_or(p.zeta + p.rho_over_n))
}

pub fn pca_gamma(p: &PcaProblem, c: &EstimatorConstants) -> f64 {
    c.gamma_override
        .unwrap_or_else(|| c.gamma_scale * (p.n() as f64).sqrt() * (p.zeta + p.rho_over_n))
}

/// `F_h(y - X beta)`.
pub fn regression_loss(p: &RegressionProblem, h: HuberParams, beta: &DenseVector) -> Result<f64> {
    loss_of_slice((&p.y - &p.x * beta).as_slice(), h)
}

/// Gradient of `F_h(y - X beta)` with respect to `beta`.
pub fn regression_loss_grad(p: &RegressionProblem, h: HuberParams, beta: &DenseVector) -> Result<DenseVector> {
    let r = &p.y - &p.x * beta;
    let mut d = DenseVector::zeros(r.len());
    grad_of_slice(r.as_slice(), h, d.as_mut_slice())?;
    Ok(-(p.x.transpose() * d))
}

/// `F_h(Y - L)`.
pub fn pca_loss(p: &PcaProblem, h: HuberParams, l: &DenseMatrix) -> Result<f64> {
    loss_of_slice((&p.y - l).as_slice(), h)
}

pub fn pca_loss_grad(p: &PcaProblem, h: HuberParams, l: &DenseMatrix) -> Result<DenseMatrix> {
    let r = &p.y - l;
    let mut g = DenseMatrix::zeros(r.nrows(), r.ncols());
    grad_of_slice(r.as_slice(), h, g.as_mut_slice())?;
    Ok(-g)
}

/// The regression objective as a composite problem.
pub fn regression_composite<'a>(p: &'a RegressionProblem, c: &EstimatorConstants) -> Result<CompositeProblem<'a>> {
    c.validate()?;
    let h = regression_huber(c)?;
    let gamma = regression_gamma(p, c);
    let lipschitz = linalg::gram_top_eigenvalue(&p.x, 1e-10, 10_000)?;
    Ok(CompositeProblem {
        dim: p.d(),
        smooth: Box::new(move |beta, grad| {
            let r = &p.y - &p.x * beta;
            let value = loss_of_slice(r.as_slice(), h)?;
            if let Some(g) = grad {
                let mut d = DenseVector::zeros(r.len());
                grad_of_slice(r.as_slice(), h, d.as_mut_slice())?;
                p.x.tr_mul_to(&d, g);
                g.neg_mut();
            }
            Ok(value)
        }),
        regularizer: if gamma > 0.0 { Regularizer::L1 { gamma } } else { Regularizer::None },
        constraint: None,
        // Guard against a zero design; any positive constant is valid then.
        lipschitz: if lipschitz > 0.0 { lipschitz * (1.0 + 1e-9) } else { 1.0 },
    })
}

/// The PCA objective as a composite problem over column-major matrices.
pub fn pca_composite<'a>(p: &'a PcaProblem, c: &EstimatorConstants) -> Result<CompositeProblem<'a>> {
    c.validate()?;
    let h = pca_huber(p, c)?;
    let gamma = pca_gamma(p, c);
    let n = p.n();
    Ok(CompositeProblem {
        dim: n * n,
        smooth: Box::new(move |l, grad| {
            let yv = p.y.as_slice();
            let r: Vec<f64> = yv.iter().zip(l.iter()).map(|(a, b)| a - b).collect();
            let value = loss_of_slice(&r, h)?;
            if let Some(g) = grad {
                grad_of_slice(&r, h, g.as_mut_slice())?;
                g.neg_mut();
            }
            Ok(value)
        }),
        regularizer: Regularizer::Nuclear { gamma, rows: n, cols: n },
        constraint: Some(p.ball()),
        lipschitz: 1.0,
    })
}

/// Huber-loss regression with an l1 penalty, started from zero.
pub fn estimate_sparse_regression(
    p: &RegressionProblem,
    c: &EstimatorConstants,
    cfg: &SolverConfig,
) -> Result<(DenseVector, SolveResult)> {
    if p.d() < 2 {
        return Err(Error::pre(format!("regression needs d >= 2, got {}", p.d())));
    }
    if p.x.iter().chain(p.y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("regression data contains non-finite values".into()));
    }
    let problem = regression_composite(p, c)?;
    let mut result = solve_fista(&problem, cfg, &DenseVector::zeros(p.d()))?;
    if let Some(truth) = &p.truth {
        result.reference_dominated = Some(certify_against_reference(
            &problem,
            &result.point,
            &truth.beta,
            cfg.objective_reference_margin,
        )?);
    }
    Ok((result.point.clone(), result))
}

/// Huber-loss PCA with a nuclear penalty over the max-norm ball, started
/// from the projection of the observation.
///
/// The problem is first solved without the constraint by the accelerated
/// solver. A feasible minimizer of the relaxation also minimizes the
/// constrained problem; otherwise its projection warm-starts the splitting
/// solver.
pub fn estimate_pca(p: &PcaProblem, c: &EstimatorConstants, cfg: &SolverConfig) -> Result<(DenseMatrix, SolveResult)> {
    if p.n() < 2 {
        return Err(Error::pre(format!("PCA needs n >= 2, got {}", p.n())));
    }
    if p.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("observation contains non-finite values".into()));
    }
    let problem = pca_composite(p, c)?;
    let mut relaxed = pca_composite(p, c)?;
    relaxed.constraint = None;
    let start = linalg::flatten(&project_maxnorm(&p.y, p.ball()));
    let free = solve_fista(&relaxed, cfg, &start)?;
    let mut result = if free.converged && problem.is_feasible(&free.point) {
        SolveResult { history: Vec::new(), ..free }
    } else {
        let mut warm = free.point;
        p.ball().clamp_in_place(warm.as_mut_slice());
        let mut r = solve_split(&problem, cfg, &warm)?;
        r.iterations += free.iterations;
        r
    };
    if let Some(truth) = &p.truth {
        result.reference_dominated = Some(certify_against_reference(
            &problem,
            &result.point,
            &linalg::flatten(&truth.l),
            cfg.objective_reference_margin,
        )?);
    }
    let n = p.n();
    Ok((linalg::unflatten(&result.point, n, n), result))
}

fn check_len(beta_hat: &DenseVector, d: usize) -> Result<()> {
    if beta_hat.len() != d {
        return Err(Error::pre(format!("estimate has length {}, expected {d}", beta_hat.len())));
    }
    Ok(())
}

/// `(1/n) ||X (beta_hat - beta*)||^2`.
pub fn prediction_error(p: &RegressionProblem, beta_hat: &DenseVector) -> Result<f64> {
    let truth = p.truth()?;
    check_len(beta_hat, p.d())?;
    Ok((&p.x * (beta_hat - &truth.beta)).norm_squared() / p.n() as f64)
}

/// `||beta_hat - beta*||^2`.
pub fn parameter_error(p: &RegressionProblem, beta_hat: &DenseVector) -> Result<f64> {
    let truth = p.truth()?;
    check_len(beta_hat, p.d())?;
    Ok((beta_hat - &truth.beta).norm_squared())
}

/// `||L_hat - L*||_F`.
pub fn frobenius_error(p: &PcaProblem, l_hat: &DenseMatrix) -> Result<f64> {
    let truth = p.truth()?;
    if l_hat.shape() != truth.l.shape() {
        return Err(Error::pre("estimate and truth shapes differ"));
    }
    Ok((l_hat - &truth.l).norm())
}
