//! Numerical checks of the conditions under which the estimators provably
//! work: decomposability, contraction, gradient bound, restricted strong
//! convexity, and the radius relation, plus the design-matrix assumptions
//! of the regression setting.
//!
//! Cone sampling stands in for the covering arguments of the analysis, so
//! every maximum and minimum reported here is a one-sided Monte-Carlo
//! estimate: a measured contraction constant can only underestimate the
//! true one, and a measured curvature can only overestimate it.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::datagen::Seed;
use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorConstants, PcaProblem, RegressionProblem};
use crate::huber::HuberParams;
use crate::linalg::{self, neumaier_sum, DenseMatrix, DenseVector};
use crate::prox::MaxNormBall;

/// Relative slack for cone membership and decomposability comparisons.
pub const NORM_TOL: f64 = 1e-9;

/// The regularizer norm on flat points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegNorm {
    L1,
    Nuclear { rows: usize, cols: usize },
}

impl RegNorm {
    pub fn value(&self, u: &DenseVector) -> Result<f64> {
        match *self {
            RegNorm::L1 => Ok(linalg::l1_norm(u.as_slice())),
            RegNorm::Nuclear { rows, cols } => linalg::nuclear_norm(&linalg::unflatten(u, rows, cols)),
        }
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DenseVector {
    DenseVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    // Column-major fill order, matching nalgebra's storage.
    DenseMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// A linear subspace of flat points that can be sampled from.
#[derive(Debug, Clone, PartialEq)]
pub enum Subspace {
    /// Vectors supported on the given coordinates.
    Coordinates { dim: usize, idx: Vec<usize> },
    /// Matrices `left * C * right^T`.
    MatrixSpans { left: DenseMatrix, right: DenseMatrix },
    /// Span of explicit basis vectors.
    Span(Vec<DenseVector>),
}

impl Subspace {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DenseVector {
        match self {
            Subspace::Coordinates { dim, idx } => {
                let mut v = DenseVector::zeros(*dim);
                for &i in idx {
                    v[i] = rng.sample(StandardNormal);
                }
                v
            }
            Subspace::MatrixSpans { left, right } => {
                let c = gaussian_matrix(rng, left.ncols(), right.ncols());
                linalg::flatten(&(left * c * right.transpose()))
            }
            Subspace::Span(basis) => {
                let dim = basis.first().map_or(0, |b| b.len());
                let mut v = DenseVector::zeros(dim);
                for b in basis {
                    let w: f64 = rng.sample(StandardNormal);
                    v.axpy(w, b, 1.0);
                }
                v
            }
        }
    }
}

/// Samples `u in Omega`, `v in Omega_bar_perp` and checks
/// `||u + v|| = ||u|| + ||v||` on every trial.
///
/// Overlapping subspaces are not an error; they are expected to fail.
pub fn check_decomposability(
    norm: RegNorm,
    omega: &Subspace,
    omega_bar_perp: &Subspace,
    trials: usize,
    seed: Seed,
) -> Result<bool> {
    let results: Result<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let u = omega.sample(&mut rng);
            let v = omega_bar_perp.sample(&mut rng);
            let nu = norm.value(&u)?;
            let nv = norm.value(&v)?;
            let joint = norm.value(&(&u + &v))?;
            Ok((joint - nu - nv).abs() <= NORM_TOL * (nu + nv))
        })
        .collect();
    Ok(results?.into_iter().all(|b| b))
}

/// Structure of `Omega_bar` for the two problems.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeStructure {
    /// `Omega_bar` is the set of vectors supported on `support`.
    SparseSupport { dim: usize, support: Vec<usize>, off_support: Vec<usize> },
    /// `Omega_bar = {U A + B V^T}` for orthonormal `U`, `V`; the complements
    /// span `Omega_bar_perp = {U_perp C V_perp^T}`.
    LowRank { u: DenseMatrix, v: DenseMatrix, u_perp: DenseMatrix, v_perp: DenseMatrix },
}

/// Sampler for the cone `S_b = {u : ||u|| <= b ||u_{Omega_bar}||}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSampler {
    pub structure: ConeStructure,
    pub expansion: f64,
}

impl ConeSampler {
    pub fn sparse(dim: usize, support: &[usize]) -> Result<Self> {
        let mut s = support.to_vec();
        s.sort_unstable();
        s.dedup();
        if s.is_empty() || s.iter().any(|&j| j >= dim) {
            return Err(Error::pre("support must be a non-empty set of in-range indices"));
        }
        let off = (0..dim).filter(|j| s.binary_search(j).is_err()).collect();
        Ok(Self {
            structure: ConeStructure::SparseSupport { dim, support: s, off_support: off },
            expansion: 4.0,
        })
    }

    /// Row and column spans of a rank-`rank` matrix.
    pub fn lowrank(truth: &DenseMatrix, rank: usize) -> Result<Self> {
        if !truth.is_square() {
            return Err(Error::pre("low-rank cone needs a square truth"));
        }
        let n = truth.nrows();
        if rank < 1 || rank > n {
            return Err(Error::pre(format!("rank must lie in [1, {n}], got {rank}")));
        }
        let dec = linalg::svd(truth)?;
        Ok(Self {
            structure: ConeStructure::LowRank {
                u: dec.u.columns(0, rank).into_owned(),
                v: dec.v.columns(0, rank).into_owned(),
                u_perp: linalg::complement_columns(&dec.u, rank),
                v_perp: linalg::complement_columns(&dec.v, rank),
            },
            expansion: 4.0,
        })
    }

    pub fn with_expansion(mut self, expansion: f64) -> Self {
        self.expansion = expansion;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.structure {
            ConeStructure::SparseSupport { dim, .. } => *dim,
            ConeStructure::LowRank { u, v, .. } => u.nrows() * v.nrows(),
        }
    }

    pub fn reg_norm(&self) -> RegNorm {
        match &self.structure {
            ConeStructure::SparseSupport { .. } => RegNorm::L1,
            ConeStructure::LowRank { u, v, .. } => RegNorm::Nuclear { rows: u.nrows(), cols: v.nrows() },
        }
    }

    pub fn omega_bar_perp(&self) -> Subspace {
        match &self.structure {
            ConeStructure::SparseSupport { dim, off_support, .. } => {
                Subspace::Coordinates { dim: *dim, idx: off_support.clone() }
            }
            ConeStructure::LowRank { u_perp, v_perp, .. } => {
                Subspace::MatrixSpans { left: u_perp.clone(), right: v_perp.clone() }
            }
        }
    }

    /// `Omega`: for sparse vectors the same as `Omega_bar`; for matrices
    /// those whose row and column spans lie in the truth's.
    pub fn omega(&self) -> Subspace {
        match &self.structure {
            ConeStructure::SparseSupport { dim, support, .. } => {
                Subspace::Coordinates { dim: *dim, idx: support.clone() }
            }
            ConeStructure::LowRank { u, v, .. } => Subspace::MatrixSpans { left: u.clone(), right: v.clone() },
        }
    }

    /// Orthogonal projection onto `Omega_bar`.
    pub fn project_omega_bar(&self, x: &DenseVector) -> DenseVector {
        match &self.structure {
            ConeStructure::SparseSupport { dim, support, .. } => {
                let mut out = DenseVector::zeros(*dim);
                for &j in support {
                    out[j] = x[j];
                }
                out
            }
            ConeStructure::LowRank { u_perp, v_perp, .. } => {
                let n = u_perp.nrows();
                let m = linalg::unflatten(x, n, v_perp.nrows());
                let perp = u_perp * (u_perp.transpose() * &m * v_perp) * v_perp.transpose();
                linalg::flatten(&(m - perp))
            }
        }
    }

    /// `||x||_reg / ||x_{Omega_bar}||_reg`, infinite when the projection
    /// vanishes on a nonzero `x`.
    pub fn cone_ratio(&self, x: &DenseVector) -> Result<f64> {
        let norm = self.reg_norm();
        let full = norm.value(x)?;
        if full == 0.0 {
            return Ok(0.0);
        }
        let proj = norm.value(&self.project_omega_bar(x))?;
        Ok(if proj == 0.0 { f64::INFINITY } else { full / proj })
    }

    pub fn contains(&self, x: &DenseVector, rel_tol: f64) -> Result<bool> {
        Ok(self.cone_ratio(x)? <= self.expansion * (1.0 + rel_tol))
    }

    /// A random direction in the cone. The `Omega_bar` part is Gaussian
    /// (sometimes with equal magnitudes), the complement part has random
    /// sparsity or rank and a norm budget drawn from `[0, b - 1]`, with both
    /// endpoints hit with positive probability.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<DenseVector> {
        let budget = match rng.random_range(0..4u8) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        } * (self.expansion - 1.0).max(0.0);
        let norm = self.reg_norm();
        let (head, tail) = match &self.structure {
            ConeStructure::SparseSupport { dim, support, off_support } => {
                let equal = rng.random_bool(0.5);
                let mut head = DenseVector::zeros(*dim);
                let keep = rng.random_range(1..=support.len());
                for &j in index::sample(rng, support.len(), keep).iter().map(|i| &support[i]) {
                    head[j] = if equal {
                        if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                    } else {
                        rng.sample(StandardNormal)
                    };
                }
                let mut tail = DenseVector::zeros(*dim);
                if !off_support.is_empty() {
                    let equal = rng.random_bool(0.5);
                    let count = rng.random_range(1..=off_support.len());
                    for i in index::sample(rng, off_support.len(), count).iter() {
                        tail[off_support[i]] = if equal {
                            if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                        } else {
                            rng.sample(StandardNormal)
                        };
                    }
                }
                (head, tail)
            }
            ConeStructure::LowRank { u, v, u_perp, v_perp } => {
                let n = u.nrows();
                let a = gaussian_matrix(rng, u.ncols(), n);
                let b = gaussian_matrix(rng, n, v.ncols());
                let head = u * a + b * v.transpose();
                let free = u_perp.ncols().min(v_perp.ncols());
                let tail = if free == 0 {
                    DenseMatrix::zeros(n, v.nrows())
                } else {
                    let rank = rng.random_range(1..=free);
                    let g1 = gaussian_matrix(rng, u_perp.ncols(), rank);
                    let g2 = gaussian_matrix(rng, v_perp.ncols(), rank);
                    u_perp * (g1 * g2.transpose()) * v_perp.transpose()
                };
                (linalg::flatten(&head), linalg::flatten(&tail))
            }
        };
        let head_norm = norm.value(&head)?;
        let tail_norm = norm.value(&tail)?;
        if head_norm == 0.0 {
            return Err(Error::Sampling("cone sample has a vanishing structured part".into()));
        }
        if tail_norm == 0.0 || budget == 0.0 {
            return Ok(head);
        }
        Ok(head + tail * (budget * head_norm / tail_norm))
    }
}

/// Largest sampled `||u||_reg / E(u)` over cone directions.
pub fn measure_contraction<E>(cone: &ConeSampler, error_metric: E, trials: usize, seed: Seed) -> Result<f64>
where
    E: Fn(&DenseVector) -> f64 + Sync,
{
    let norm = cone.reg_norm();
    let ratios: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let u = cone.sample(&mut rng)?;
            let e = error_metric(&u);
            if !(e > 0.0) {
                return Err(Error::pre(format!("error metric vanishes on a cone direction (trial {t})")));
            }
            Ok(norm.value(&u)? / e)
        })
        .collect();
    Ok(ratios?.into_iter().fold(0.0, f64::max))
}

/// Upper bound on the regression gradient at the truth, holding with
/// probability `1 - delta / 2`.
pub fn regression_gradient_bound(n: usize, d: usize, nu: f64, delta: f64) -> f64 {
    20.0 * (nu * n as f64 * ((d as f64).ln() + (2.0 / delta).ln())).sqrt()
}

/// Upper bound on the spectral norm of the PCA gradient at the truth,
/// holding with probability `1 - delta / 2`.
pub fn pca_gradient_bound(n: usize, h: f64, delta: f64) -> f64 {
    10.0 * h * (n as f64 + (2.0 / delta).ln()).sqrt()
}

/// A problem with ground truth, viewed through the lens of the
/// meta-theorem: `F(theta* + u) = sum_i f_h(eta_i - (A u)_i)` where `eta`
/// is the residual at the truth and `A` is the design (regression) or the
/// identity (PCA).
#[derive(Debug, Clone, Copy)]
pub enum Instance<'a> {
    Regression { problem: &'a RegressionProblem, constants: EstimatorConstants },
    Pca { problem: &'a PcaProblem, constants: EstimatorConstants },
}

impl Instance<'_> {
    pub fn truth_point(&self) -> Result<DenseVector> {
        match self {
            Instance::Regression { problem, .. } => Ok(problem.truth()?.beta.clone()),
            Instance::Pca { problem, .. } => Ok(linalg::flatten(&problem.truth()?.l)),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Instance::Regression { problem, constants } => estimators::regression_gamma(problem, constants),
            Instance::Pca { problem, constants } => estimators::pca_gamma(problem, constants),
        }
    }

    pub fn huber(&self) -> Result<HuberParams> {
        match self {
            Instance::Regression { constants, .. } => estimators::regression_huber(constants),
            Instance::Pca { problem, constants } => estimators::pca_huber(problem, constants),
        }
    }

    /// Residual `eta` at the truth.
    pub fn residual_at_truth(&self) -> Result<DenseVector> {
        match self {
            Instance::Regression { problem, .. } => Ok(&problem.y - &problem.x * &problem.truth()?.beta),
            Instance::Pca { problem, .. } => Ok(linalg::flatten(&(&problem.y - &problem.truth()?.l))),
        }
    }

    /// `A u`.
    pub fn apply(&self, u: &DenseVector) -> DenseVector {
        match self {
            Instance::Regression { problem, .. } => &problem.x * u,
            Instance::Pca { .. } => u.clone(),
        }
    }

    /// `E(u)`: `||X u|| / sqrt(n)` for regression, Frobenius for PCA.
    pub fn error_metric(&self, u: &DenseVector) -> f64 {
        match self {
            Instance::Regression { problem, .. } => (&problem.x * u).norm() / (problem.n() as f64).sqrt(),
            Instance::Pca { .. } => u.norm(),
        }
    }

    pub fn constraint(&self) -> Option<MaxNormBall> {
        match self {
            Instance::Regression { .. } => None,
            Instance::Pca { problem, .. } => Some(problem.ball()),
        }
    }

    pub fn cone(&self) -> Result<ConeSampler> {
        match self {
            Instance::Regression { problem, .. } => {
                let truth = problem.truth()?;
                ConeSampler::sparse(problem.d(), &truth.support)
            }
            Instance::Pca { problem, .. } => {
                let truth = problem.truth()?;
                ConeSampler::lowrank(&truth.l, truth.rank)
            }
        }
    }

    pub fn reg_norm(&self) -> RegNorm {
        match self {
            Instance::Regression { .. } => RegNorm::L1,
            Instance::Pca { problem, .. } => RegNorm::Nuclear { rows: problem.n(), cols: problem.n() },
        }
    }

    /// Gradient of the loss at the truth, flattened.
    pub fn gradient_at_truth(&self) -> Result<DenseVector> {
        let h = self.huber()?;
        match self {
            Instance::Regression { problem, .. } => {
                estimators::regression_loss_grad(problem, h, &problem.truth()?.beta)
            }
            Instance::Pca { problem, .. } => {
                Ok(linalg::flatten(&estimators::pca_loss_grad(problem, h, &problem.truth()?.l)?))
            }
        }
    }

    /// Dual of the regularizer norm.
    pub fn dual_norm(&self, g: &DenseVector) -> Result<f64> {
        match self.reg_norm() {
            RegNorm::L1 => Ok(linalg::max_abs(g.as_slice())),
            RegNorm::Nuclear { rows, cols } => linalg::spectral_norm(&linalg::unflatten(g, rows, cols)),
        }
    }

    /// Composite objective `F(theta) + gamma ||theta||`.
    pub fn objective(&self, theta: &DenseVector) -> Result<f64> {
        let h = self.huber()?;
        let loss = match self {
            Instance::Regression { problem, .. } => estimators::regression_loss(problem, h, theta)?,
            Instance::Pca { problem, .. } => {
                let n = problem.n();
                estimators::pca_loss(problem, h, &linalg::unflatten(theta, n, n))?
            }
        };
        Ok(loss + self.gamma() * self.reg_norm().value(theta)?)
    }
}

/// Dual norm of the loss gradient at the truth.
pub fn measure_gradient_dual_norm(instance: &Instance<'_>) -> Result<f64> {
    let g = instance.gradient_at_truth()?;
    instance.dual_norm(&g)
}

/// `[F(theta* + u) - F(theta*) - <grad F(theta*), u>] / (E(u)^2 / 2)` for
/// the image `w = A u` of a direction, evaluated term by term without
/// cancellation.
fn curvature_ratio(h: HuberParams, eta: &DenseVector, w: &DenseVector, e: f64) -> f64 {
    let bracket = neumaier_sum(eta.iter().zip(w.iter()).map(|(&a, &b)| h.bregman_unchecked(a, -b)));
    bracket / (0.5 * e * e)
}

/// Curvature ratio of a single direction `u`.
pub fn rsc_ratio(instance: &Instance<'_>, u: &DenseVector) -> Result<f64> {
    let e = instance.error_metric(u);
    if !(e > 0.0) {
        return Err(Error::pre("direction has zero error metric"));
    }
    let eta = instance.residual_at_truth()?;
    Ok(curvature_ratio(instance.huber()?, &eta, &instance.apply(u), e))
}

/// Outcome of a curvature measurement at a fixed radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RscEstimate {
    /// Minimum sampled ratio; `+inf` when the feasible sphere is empty.
    pub kappa: f64,
    /// Smallest sampled bracket (non-negative by convexity).
    pub min_bracket: f64,
    pub samples: usize,
    /// The sphere `{E(u) = R, theta* + u feasible}` is empty.
    pub vacuous: bool,
}

/// Largest `E(u)` over feasible `theta* + u`, or infinity without a
/// constraint.
fn feasible_diameter(instance: &Instance<'_>) -> Result<f64> {
    match instance.constraint() {
        None => Ok(f64::INFINITY),
        Some(ball) => {
            let theta = instance.truth_point()?;
            Ok(neumaier_sum(theta.iter().map(|t| (ball.radius() + t.abs()).powi(2))).sqrt())
        }
    }
}

/// Feasible direction along `w` with `E = radius`: clamps `theta* + c w`
/// to the constraint and bisects on `c`. Only meaningful for the identity
/// error metric (PCA).
fn clamp_direction(theta: &DenseVector, w: &DenseVector, ball: MaxNormBall, radius: f64) -> Option<DenseVector> {
    let at = |c: f64| {
        let mut p = theta + w * c;
        ball.clamp_in_place(p.as_mut_slice());
        p - theta
    };
    let reach = at(1e12 / w.amax().max(f64::MIN_POSITIVE)).norm();
    if reach < radius {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, radius / w.norm());
    while at(hi).norm() < radius {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid).norm() < radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(at(hi))
}

/// Pre-sampled cone directions, reused across radii so that curvature
/// estimates at different radii are comparable.
struct DirectionBank {
    /// Unit-`E` directions and their images.
    directions: Vec<(DenseVector, DenseVector)>,
}

impl DirectionBank {
    fn new(instance: &Instance<'_>, cone: &ConeSampler, trials: usize, seed: Seed) -> Result<Self> {
        let mut raw: Vec<DenseVector> = (0..trials)
            .into_par_iter()
            .map(|t| cone.sample(&mut seed.derive(t as u64).rng()))
            .collect::<Result<_>>()?;
        // Toward the origin: always in Omega and, under a box, feasible.
        if let Ok(theta) = instance.truth_point() {
            if theta.norm() > 0.0 {
                raw.push(-theta);
            }
        }
        let directions = raw
            .into_iter()
            .filter_map(|u| {
                let e = instance.error_metric(&u);
                (e > 0.0).then(|| {
                    let u = u / e;
                    let w = instance.apply(&u);
                    (u, w)
                })
            })
            .collect();
        Ok(Self { directions })
    }

    fn estimate(&self, instance: &Instance<'_>, cone: &ConeSampler, radius: f64) -> Result<RscEstimate> {
        if !(radius > 0.0) {
            return Err(Error::pre(format!("radius must be positive, got {radius}")));
        }
        if radius > feasible_diameter(instance)? {
            return Ok(RscEstimate { kappa: f64::INFINITY, min_bracket: f64::INFINITY, samples: 0, vacuous: true });
        }
        let h = instance.huber()?;
        let eta = instance.residual_at_truth()?;
        let results: Vec<Option<(f64, f64)>> = match instance.constraint() {
            None => self
                .directions
                .par_iter()
                .map(|(_, w)| {
                    let ratio = curvature_ratio(h, &eta, &(w * radius), radius);
                    Some((ratio, ratio * 0.5 * radius * radius))
                })
                .collect(),
            Some(ball) => {
                let theta = instance.truth_point()?;
                self.directions
                    .par_iter()
                    .map(|(u, _)| {
                        let v = clamp_direction(&theta, u, ball, radius)?;
                        if !cone.contains(&v, NORM_TOL).unwrap_or(false) {
                            return None;
                        }
                        let e = instance.error_metric(&v);
                        let ratio = curvature_ratio(h, &eta, &instance.apply(&v), e);
                        Some((ratio, ratio * 0.5 * e * e))
                    })
                    .collect()
            }
        };
        let kept: Vec<(f64, f64)> = results.into_iter().flatten().collect();
        if kept.is_empty() {
            return Err(Error::Sampling(format!(
                "no feasible cone direction at radius {radius:e} after {} attempts",
                self.directions.len()
            )));
        }
        Ok(RscEstimate {
            kappa: kept.iter().map(|k| k.0).fold(f64::INFINITY, f64::min),
            min_bracket: kept.iter().map(|k| k.1).fold(f64::INFINITY, f64::min),
            samples: kept.len(),
            vacuous: false,
        })
    }
}

/// Minimum sampled curvature ratio over cone directions with `E(u) = R`
/// and `theta* + u` feasible.
pub fn estimate_rsc(
    instance: &Instance<'_>,
    cone: &ConeSampler,
    radius: f64,
    trials: usize,
    seed: Seed,
) -> Result<RscEstimate> {
    DirectionBank::new(instance, cone, trials, seed)?.estimate(instance, cone, radius)
}

/// Monte-Carlo estimate of the restricted eigenvalue
/// `min (1/n) ||X u||^2 / ||u||^2` over `||u_S||_1 >= 0.1 ||u||_1`.
///
/// Besides random cone directions, each trial tries the bottom eigenvector
/// of the Gram matrix restricted to `S` plus a few random coordinates. The
/// estimate can only decrease as trials are added.
pub fn check_re_property(x: &DenseMatrix, support: &[usize], trials: usize, seed: Seed) -> Result<f64> {
    let (n, d) = x.shape();
    let cone = ConeSampler::sparse(d, support)?.with_expansion(10.0);
    let ConeStructure::SparseSupport { support: s, off_support, .. } = &cone.structure else {
        unreachable!("sparse cone");
    };
    let quotient = |u: &DenseVector| (x * u).norm_squared() / (n as f64 * u.norm_squared());
    let values: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let mut best = quotient(&cone.sample(&mut rng)?);
            let extra = if off_support.is_empty() { 0 } else { rng.random_range(0..=off_support.len().min(s.len() * 9)) };
            let mut coords = s.clone();
            coords.extend(index::sample(&mut rng, off_support.len(), extra).iter().map(|i| off_support[i]));
            let sub = x.select_columns(coords.iter());
            let eig = (sub.transpose() * &sub).symmetric_eigen();
            let (k, _) = eig.eigenvalues.argmin();
            let mut u = DenseVector::zeros(d);
            for (c, &j) in coords.iter().enumerate() {
                u[j] = eig.eigenvectors[(c, k)];
            }
            if cone.contains(&u, NORM_TOL)? {
                best = best.min(quotient(&u));
            }
            Ok(best)
        })
        .collect();
    Ok(values?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Largest dimension for which [`exact_re_constant`] enumerates faces.
pub const EXACT_RE_MAX_DIM: usize = 12;

/// Exact restricted eigenvalue over `||u_S||_1 >= 0.1 ||u||_1` for small
/// `d`, by enumerating the faces of the cone. On each face the minimizer of
/// the Rayleigh quotient is an eigenvector of the form restricted to the
/// face's span; all such eigenvectors that lie in the cone are candidates.
pub fn exact_re_constant(x: &DenseMatrix, support: &[usize]) -> Result<f64> {
    let (n, d) = x.shape();
    if d > EXACT_RE_MAX_DIM {
        return Err(Error::pre(format!("exact enumeration supports d <= {EXACT_RE_MAX_DIM}, got {d}")));
    }
    let cone = ConeSampler::sparse(d, support)?.with_expansion(10.0);
    let ConeStructure::SparseSupport { support: s, .. } = &cone.structure else {
        unreachable!("sparse cone");
    };
    let in_s: Vec<bool> = (0..d).map(|j| s.binary_search(&j).is_ok()).collect();
    let gram = x.transpose() * x / n as f64;
    let mut best = f64::INFINITY;
    let mut consider = |coords: &[usize], basis: &DenseMatrix| {
        if basis.ncols() == 0 {
            return;
        }
        let sub = gram.select_rows(coords.iter()).select_columns(coords.iter());
        let form = basis.transpose() * sub * basis;
        let eig = form.symmetric_eigen();
        for k in 0..eig.eigenvalues.len() {
            let local = basis * eig.eigenvectors.column(k);
            let mut u = DenseVector::zeros(d);
            for (c, &j) in coords.iter().enumerate() {
                u[j] = local[c];
            }
            let l1 = linalg::l1_norm(u.as_slice());
            let l1_s: f64 = s.iter().map(|&j| u[j].abs()).sum();
            if l1 > 0.0 && l1_s >= 0.1 * l1 * (1.0 - NORM_TOL) {
                let q = u.dot(&(&gram * &u)) / u.norm_squared();
                best = best.min(q);
            }
        }
    };
    for mask in 1u32..(1u32 << d) {
        let coords: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
        if !coords.iter().any(|&j| in_s[j]) {
            continue;
        }
        let t = coords.len();
        consider(&coords, &DenseMatrix::identity(t, t));
        // Active cone constraint sum_{S} 9 |u_j| - sum_{S^c} |u_j| = 0 for
        // each sign pattern (up to global sign).
        if coords.iter().all(|&j| in_s[j]) {
            continue;
        }
        for signs in 0u32..(1u32 << (t - 1)) {
            let a = DenseVector::from_fn(t, |c, _| {
                let sigma = if c + 1 < t && signs & (1 << c) != 0 { -1.0 } else { 1.0 };
                if in_s[coords[c]] { 9.0 * sigma } else { -sigma }
            });
            let a = &a / a.norm();
            // Orthonormal basis of a^perp inside R^t.
            let proj = DenseMatrix::identity(t, t) - &a * a.transpose();
            let dec = proj.symmetric_eigen();
            let keep: Vec<usize> = (0..t).filter(|&k| dec.eigenvalues[k] > 0.5).collect();
            let basis = dec.eigenvectors.select_columns(keep.iter());
            consider(&coords, &basis);
        }
    }
    Ok(best)
}

/// Whether removing the `m` largest coordinates of `X u` keeps at least
/// half its norm, for sampled cone directions `u`.
pub fn check_well_spread(x: &DenseMatrix, support: &[usize], m: usize, trials: usize, seed: Seed) -> Result<bool> {
    let (n, d) = x.shape();
    if m > n {
        return Err(Error::pre(format!("m must not exceed n = {n}, got {m}")));
    }
    if m == 0 {
        return Ok(true);
    }
    let cone = ConeSampler::sparse(d, support)?.with_expansion(10.0);
    let ConeStructure::SparseSupport { support: s, .. } = &cone.structure else {
        unreachable!("sparse cone");
    };
    let survives = |u: &DenseVector| {
        let w = x * u;
        let mut sq: Vec<f64> = w.iter().map(|v| v * v).collect();
        sq.sort_unstable_by(|a, b| b.total_cmp(a));
        let total = neumaier_sum(sq.iter().copied());
        let rest = neumaier_sum(sq[m..].iter().copied());
        rest.sqrt() >= 0.5 * total.sqrt() * (1.0 - 1e-12)
    };
    // Adversarial candidates: rows with the largest mass on the support.
    let mut rows: Vec<(f64, usize)> = (0..n).map(|i| (s.iter().map(|&j| x[(i, j)].powi(2)).sum(), i)).collect();
    rows.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rows.iter().take(5) {
        let mut u = DenseVector::zeros(d);
        for &j in s {
            u[j] = x[(i, j)];
        }
        if u.norm() > 0.0 && !survives(&u) {
            return Ok(false);
        }
    }
    let ok: Result<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| Ok(survives(&cone.sample(&mut seed.derive(t as u64).rng())?)))
        .collect();
    Ok(ok?.into_iter().all(|b| b))
}

/// Extremes of `||X u|| / (sqrt(n) ||Sigma^{1/2} u||)` over sampled `u`
/// with at most `k_eff` non-zeros (so `||u||_1 <= sqrt(k_eff) ||u||`).
///
/// Each trial draws a random support and uses both a random vector and the
/// two extreme generalized eigenvectors of the restricted forms.
pub fn gaussian_concentration_ratios(
    x: &DenseMatrix,
    sigma: &DenseMatrix,
    k_eff: usize,
    trials: usize,
    seed: Seed,
) -> Result<(f64, f64)> {
    let (n, d) = x.shape();
    if sigma.shape() != (d, d) {
        return Err(Error::pre("covariance shape does not match the design"));
    }
    if k_eff < 1 || k_eff > d {
        return Err(Error::pre(format!("k_eff must lie in [1, {d}], got {k_eff}")));
    }
    sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
    let pairs: Result<Vec<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let mut coords = index::sample(&mut rng, d, k_eff).into_vec();
            coords.sort_unstable();
            let sub = x.select_columns(coords.iter());
            let gram = sub.transpose() * &sub / n as f64;
            let sig = sigma.select_rows(coords.iter()).select_columns(coords.iter());
            let chol = sig.clone()
                .cholesky()
                .ok_or_else(|| Error::Numeric("covariance block is not positive definite".into()))?;
            let l_inv = chol
                .l()
                .try_inverse()
                .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
            let whitened = &l_inv * &gram * l_inv.transpose();
            let eig = whitened.symmetric_eigen();
            let lo = eig.eigenvalues.min().max(0.0).sqrt();
            let hi = eig.eigenvalues.max().max(0.0).sqrt();
            let u = gaussian_vector(&mut rng, k_eff);
            let r = (u.dot(&(&gram * &u)) / u.dot(&(&sig * &u))).max(0.0).sqrt();
            Ok((lo.min(r), hi.max(r)))
        })
        .collect();
    let pairs = pairs?;
    Ok((
        pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        pairs.iter().map(|p| p.1).fold(0.0, f64::max),
    ))
}

/// `1/2 <= ||X u|| / (sqrt(n) ||Sigma^{1/2} u||) <= 2` on every sample.
pub fn check_gaussian_concentration(
    x: &DenseMatrix,
    sigma: &DenseMatrix,
    k_eff: usize,
    trials: usize,
    seed: Seed,
) -> Result<bool> {
    let (lo, hi) = gaussian_concentration_ratios(x, sigma, k_eff, trials, seed)?;
    Ok(lo >= 0.5 && hi <= 2.0)
}

/// Problem-level constants that the estimator does not use but the
/// analysis does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateParams {
    /// Inlier fraction of the noise model.
    pub alpha: f64,
    /// Restricted eigenvalue used in `s = 4 sqrt(k / lambda)`; ignored for PCA.
    pub lambda: f64,
    pub trials: usize,
    pub seed: Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConditionFlags {
    pub decomposability: bool,
    pub contraction: bool,
    pub gradient: bool,
    pub rsc: bool,
    pub radius: bool,
}

impl ConditionFlags {
    pub fn all(&self) -> bool {
        self.decomposability && self.contraction && self.gradient && self.rsc && self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaCertificate {
    /// Regularization weight of the estimator.
    pub gamma: f64,
    /// Twice the dual norm of the gradient at the truth.
    pub gamma_measured: f64,
    /// Contraction constant of the analysis.
    pub s: f64,
    /// Largest sampled contraction ratio.
    pub s_measured: f64,
    /// Sampled curvature at radius `r`.
    pub kappa: f64,
    /// Curvature constant of the analysis (`0.01 alpha n` or `0.01 alpha`).
    pub kappa_nominal: f64,
    pub r: f64,
    pub conditions: ConditionFlags,
    pub radius_formula_ok: bool,
    /// The feasible sphere of radius `r` is empty.
    pub rsc_vacuous: bool,
    /// `||Delta|| / ||Delta_{Omega_bar}||` for the estimate.
    pub cone_ratio: f64,
    pub cone_membership: bool,
    /// `E(theta_hat - theta*)`.
    pub error: f64,
    pub error_within_radius: bool,
    pub reference_dominated: bool,
}

impl MetaCertificate {
    /// Whether `4 gamma s / kappa <= r`, with a guard for non-positive
    /// curvature. An infinite curvature (empty feasible sphere) satisfies it.
    pub fn radius_formula(gamma: f64, s: f64, kappa: f64, r: f64) -> bool {
        if !(kappa > 0.0) || !(r > 0.0) {
            return false;
        }
        4.0 * gamma * s / kappa <= r
    }

    /// The implication of the meta-theorem failed on this instance.
    pub fn implication_violated(&self) -> bool {
        self.conditions.all() && self.reference_dominated && !self.error_within_radius
    }

    /// Flat `key = value` lines.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("gamma", format!("{:.16e}", self.gamma));
        put("gamma_measured", format!("{:.16e}", self.gamma_measured));
        put("s", format!("{:.16e}", self.s));
        put("s_measured", format!("{:.16e}", self.s_measured));
        put("kappa", format!("{:.16e}", self.kappa));
        put("kappa_nominal", format!("{:.16e}", self.kappa_nominal));
        put("radius", format!("{:.16e}", self.r));
        put("error", format!("{:.16e}", self.error));
        put("cone_ratio", format!("{:.16e}", self.cone_ratio));
        put("decomposability", self.conditions.decomposability.to_string());
        put("contraction", self.conditions.contraction.to_string());
        put("gradient", self.conditions.gradient.to_string());
        put("rsc", self.conditions.rsc.to_string());
        put("radius_bound", self.conditions.radius.to_string());
        put("radius_formula_ok", self.radius_formula_ok.to_string());
        put("rsc_vacuous", self.rsc_vacuous.to_string());
        put("cone_membership", self.cone_membership.to_string());
        put("error_within_radius", self.error_within_radius.to_string());
        put("reference_dominated", self.reference_dominated.to_string());
        out
    }
}

/// Smallest radius (on a bisection grid) at which the sampled curvature
/// satisfies `4 gamma s / kappa(R) <= R`.
fn search_radius(
    instance: &Instance<'_>,
    cone: &ConeSampler,
    bank: &DirectionBank,
    gamma: f64,
    s: f64,
    start: f64,
) -> Result<Option<(f64, RscEstimate)>> {
    let holds = |r: f64| -> Result<Option<RscEstimate>> {
        match bank.estimate(instance, cone, r) {
            Ok(est) => Ok(MetaCertificate::radius_formula(gamma, s, est.kappa, r).then_some(est)),
            Err(Error::Sampling(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut hi = start;
    let mut found = None;
    for _ in 0..60 {
        if let Some(est) = holds(hi)? {
            found = Some(est);
            break;
        }
        hi *= 2.0;
    }
    let Some(mut est_hi) = found else { return Ok(None) };
    let mut lo = hi;
    for _ in 0..60 {
        lo *= 0.5;
        if holds(lo)?.is_none() {
            break;
        }
        hi = lo;
    }
    if lo == hi {
        return Ok(Some((hi, est_hi)));
    }
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        match holds(mid)? {
            Some(est) => {
                hi = mid;
                est_hi = est;
            }
            None => lo = mid,
        }
        if hi / lo < 1.001 {
            break;
        }
    }
    if let Some(est) = holds(hi)? {
        est_hi = est;
    }
    Ok(Some((hi, est_hi)))
}

/// Runs every check of the meta-theorem on an instance with known truth and
/// its estimate `theta_hat`.
///
/// The radius is the smallest one (up to bisection accuracy) for which the
/// sampled curvature satisfies the radius relation with the estimator's
/// `gamma`.
pub fn assemble_certificate(
    instance: &Instance<'_>,
    theta_hat: &DenseVector,
    params: &CertificateParams,
) -> Result<MetaCertificate> {
    let cone = instance.cone()?;
    let theta = instance.truth_point()?;
    let gamma = instance.gamma();

    let decomposability =
        check_decomposability(cone.reg_norm(), &cone.omega(), &cone.omega_bar_perp(), params.trials.min(200), params.seed.derive(1))?;

    let (s, kappa_nominal) = match instance {
        Instance::Regression { problem, .. } => {
            let k = problem.truth()?.k() as f64;
            if !(params.lambda > 0.0) {
                return Err(Error::pre("regression certificate needs a positive RE constant"));
            }
            (4.0 * (k / params.lambda).sqrt(), 0.01 * params.alpha * problem.n() as f64)
        }
        Instance::Pca { problem, .. } => {
            let r = problem.truth()?.rank as f64;
            (4.0 * (2.0 * r).sqrt(), 0.01 * params.alpha)
        }
    };
    let contraction_trials = match instance {
        Instance::Regression { .. } => params.trials,
        Instance::Pca { .. } => params.trials.min(200),
    };
    let s_measured = measure_contraction(&cone, |u| instance.error_metric(u), contraction_trials, params.seed.derive(2))?;
    let gamma_measured = 2.0 * measure_gradient_dual_norm(instance)?;

    let bank = DirectionBank::new(instance, &cone, params.trials, params.seed.derive(3))?;
    let start = 4.0 * gamma * s / kappa_nominal;
    let found = search_radius(instance, &cone, &bank, gamma, s, start)?;
    let (r, est) = match found {
        Some(v) => v,
        None => (
            f64::INFINITY,
            RscEstimate { kappa: 0.0, min_bracket: 0.0, samples: 0, vacuous: false },
        ),
    };

    let delta = theta_hat - &theta;
    let cone_ratio = cone.cone_ratio(&delta)?;
    let error = instance.error_metric(&delta);
    let reference_dominated = instance.objective(theta_hat)? <= instance.objective(&theta)? * (1.0 + 1e-9) + 1e-9;
    let radius_formula_ok = r.is_finite() && MetaCertificate::radius_formula(gamma, s, est.kappa, r);

    Ok(MetaCertificate {
        gamma,
        gamma_measured,
        s,
        s_measured,
        kappa: est.kappa,
        kappa_nominal,
        r,
        conditions: ConditionFlags {
            decomposability,
            contraction: s_measured <= s * (1.0 + NORM_TOL),
            gradient: gamma_measured <= gamma,
            rsc: est.kappa > 0.0 && est.min_bracket >= 0.0,
            radius: radius_formula_ok,
        },
        radius_formula_ok,
        rsc_vacuous: est.vacuous,
        cone_ratio,
        cone_membership: cone_ratio <= cone.expansion * (1.0 + 1e-6),
        error,
        error_within_radius: error < r,
        reference_dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{self, NoiseSpec};
    use crate::estimators::{estimate_sparse_regression, PcaProblem, RegressionProblem};
    use crate::solver::SolverConfig;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn l1_decomposability_and_negative_control() {
        let omega = Subspace::Coordinates { dim: 6, idx: vec![0, 2] };
        let perp = Subspace::Coordinates { dim: 6, idx: vec![1, 3, 4, 5] };
        assert!(check_decomposability(RegNorm::L1, &omega, &perp, 100, Seed(1)).unwrap());
        let overlap = Subspace::Coordinates { dim: 6, idx: vec![2, 3] };
        assert!(!check_decomposability(RegNorm::L1, &omega, &overlap, 100, Seed(1)).unwrap());
        let mut u = DenseVector::zeros(2);
        u[0] = 1.0;
        let v = -&u;
        let same = Subspace::Span(vec![u]);
        let opposite = Subspace::Span(vec![v]);
        assert!(!check_decomposability(RegNorm::L1, &same, &opposite, 10, Seed(2)).unwrap());
    }

    #[test]
    fn nuclear_decomposability() {
        let l = datagen::gen_flat_lowrank(12, 2, 1.0, Seed(3)).unwrap();
        let cone = ConeSampler::lowrank(&l, 2).unwrap();
        assert!(check_decomposability(cone.reg_norm(), &cone.omega(), &cone.omega_bar_perp(), 50, Seed(4)).unwrap());
    }

    #[test]
    fn sparse_cone_samples_are_members() {
        let cone = ConeSampler::sparse(10, &[1, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let u = cone.sample(&mut rng).unwrap();
            assert!(cone.contains(&u, NORM_TOL).unwrap());
        }
    }

    #[test]
    fn lowrank_cone_samples_are_members() {
        let l = datagen::gen_flat_lowrank(10, 2, 1.0, Seed(6)).unwrap();
        let cone = ConeSampler::lowrank(&l, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let u = cone.sample(&mut rng).unwrap();
            assert!(cone.contains(&u, NORM_TOL).unwrap());
        }
    }

    #[test]
    fn contraction_on_exact_structures() {
        let k = 3;
        let cone = ConeSampler::sparse(12, &[0, 5, 7]).unwrap().with_expansion(1.0);
        let ratio = measure_contraction(&cone, |u| u.norm(), 2000, Seed(8)).unwrap();
        assert!(ratio <= (k as f64).sqrt() * (1.0 + 1e-12));

        let r = 2;
        let l = datagen::gen_flat_lowrank(10, r, 1.0, Seed(9)).unwrap();
        let cone = ConeSampler::lowrank(&l, r).unwrap().with_expansion(1.0);
        let ratio = measure_contraction(&cone, |u| u.norm(), 300, Seed(10)).unwrap();
        assert!(ratio <= (2.0 * r as f64).sqrt() * (1.0 + 1e-9));
    }

    #[test]
    fn contraction_rejects_degenerate_metric() {
        let cone = ConeSampler::sparse(4, &[0]).unwrap();
        assert!(measure_contraction(&cone, |_| 0.0, 10, Seed(1)).is_err());
    }

    fn small_regression(noise: f64) -> RegressionProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DenseMatrix::from_fn(200, 6, |_, _| rng.sample(StandardNormal));
        let mut beta = DenseVector::zeros(6);
        beta[1] = 1.0;
        let eta = DenseVector::from_fn(200, |_, _| noise * rng.random_range(-1.0..1.0));
        let y = &x * &beta + eta;
        RegressionProblem::new(x, y).unwrap().with_truth(beta, vec![1]).unwrap()
    }

    #[test]
    fn zero_noise_gradient_vanishes() {
        let p = small_regression(0.0);
        let inst = Instance::Regression { problem: &p, constants: EstimatorConstants::default() };
        assert_eq!(measure_gradient_dual_norm(&inst).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_regime_ratio_matches_hessian_form() {
        let p = small_regression(0.5);
        let inst = Instance::Regression { problem: &p, constants: EstimatorConstants::default() };
        let cone = inst.cone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = p.n() as f64;
        for _ in 0..100 {
            let u = cone.sample(&mut rng).unwrap();
            let u = &u * (1e-3 / inst.error_metric(&u));
            // Every residual stays in the quadratic region, so the bracket is
            // ||Xu||^2 / 2 and the ratio is exactly n.
            assert_relative_eq!(rsc_ratio(&inst, &u).unwrap(), n, max_relative = 1e-9);
        }
    }

    #[test]
    fn rsc_brackets_non_negative_and_vacuous_when_empty() {
        let p = small_regression(3.0);
        let inst = Instance::Regression { problem: &p, constants: EstimatorConstants::default() };
        let cone = inst.cone().unwrap();
        let est = estimate_rsc(&inst, &cone, 2.0, 200, Seed(13)).unwrap();
        assert!(est.min_bracket >= 0.0);
        assert!(est.kappa >= 0.0 && est.kappa.is_finite());

        let l = datagen::gen_flat_lowrank(6, 1, 1.0, Seed(14)).unwrap();
        let pca = PcaProblem::new(l.clone(), 1.0, 0.5).unwrap().with_truth(l, 1).unwrap();
        let inst = Instance::Pca { problem: &pca, constants: EstimatorConstants::default() };
        let cone = inst.cone().unwrap();
        let est = estimate_rsc(&inst, &cone, 100.0, 20, Seed(15)).unwrap();
        assert!(est.vacuous && est.kappa.is_infinite());
        let est = estimate_rsc(&inst, &cone, 3.0, 50, Seed(15)).unwrap();
        assert!(!est.vacuous && est.samples >= 1 && est.kappa >= 0.0);
    }

    #[test]
    fn re_examples() {
        let n = 5;
        let x = DenseMatrix::identity(n, n) * (n as f64).sqrt();
        assert_relative_eq!(check_re_property(&x, &[0, 1], 100, Seed(1)).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(exact_re_constant(&x, &[0, 1]).unwrap(), 1.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut z = DenseMatrix::from_fn(20, 6, |_, _| rng.sample(StandardNormal));
        z.column_mut(2).fill(0.0);
        assert!(check_re_property(&z, &[2, 4], 50, Seed(2)).unwrap() <= 1e-12);
    }

    #[test]
    fn re_monotone_in_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = DenseMatrix::from_fn(15, 8, |_, _| rng.sample(StandardNormal));
        let a = check_re_property(&x, &[0, 3], 20, Seed(3)).unwrap();
        let b = check_re_property(&x, &[0, 3], 200, Seed(3)).unwrap();
        assert!(b <= a);
    }

    #[test]
    fn exact_re_is_a_lower_bound_of_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..5 {
            let x = DenseMatrix::from_fn(12, 6, |_, _| rng.sample(StandardNormal));
            let exact = exact_re_constant(&x, &[1, 4]).unwrap();
            let sampled = check_re_property(&x, &[1, 4], 500, Seed(4)).unwrap();
            assert!(exact <= sampled * (1.0 + 1e-9), "{exact} vs {sampled}");
            // Brute force over a dense set of cone directions.
            let cone = ConeSampler::sparse(6, &[1, 4]).unwrap().with_expansion(10.0);
            let gram = x.transpose() * &x / 12.0;
            let mut r2 = ChaCha8Rng::seed_from_u64(19);
            for _ in 0..20_000 {
                let u = cone.sample(&mut r2).unwrap();
                assert!(u.dot(&(&gram * &u)) / u.norm_squared() >= exact * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn well_spread_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let x = DenseMatrix::from_fn(300, 5, |_, _| rng.sample(StandardNormal));
        assert!(check_well_spread(&x, &[0], 0, 10, Seed(1)).unwrap());
        assert!(check_well_spread(&x, &[0, 1], 3, 500, Seed(1)).unwrap());
        let mut spiky = DenseMatrix::from_fn(50, 5, |_, _| 1e-3 * rng.sample::<f64, _>(StandardNormal));
        spiky.row_mut(7).fill(1000.0);
        assert!(!check_well_spread(&spiky, &[0, 1], 1, 100, Seed(2)).unwrap());
    }

    #[test]
    fn concentration_examples() {
        let sigma = DenseMatrix::identity(30, 30);
        let x = datagen::gen_gaussian_design(4000, 30, &sigma, Seed(21)).unwrap();
        assert!(check_gaussian_concentration(&x, &sigma, 2, 300, Seed(3)).unwrap());
        let sigma = DenseMatrix::identity(500, 500);
        let x = datagen::gen_gaussian_design(10, 500, &sigma, Seed(22)).unwrap();
        assert!(!check_gaussian_concentration(&x, &sigma, 20, 20, Seed(4)).unwrap());
    }

    #[test]
    fn radius_formula_guard() {
        assert!(!MetaCertificate::radius_formula(1.0, 1.0, 0.0, 10.0));
        assert!(MetaCertificate::radius_formula(1.0, 1.0, 1.0, 4.0));
        assert!(!MetaCertificate::radius_formula(1.0, 1.0, 1.0, 3.9));
        assert!(MetaCertificate::radius_formula(1.0, 1.0, f64::INFINITY, 1.0));
    }

    #[test]
    fn regression_certificate_end_to_end() {
        let n = 4000;
        let sigma = DenseMatrix::identity(10, 10);
        let noise = NoiseSpec::mixture(1.0, 1.0, 1.0);
        let p = datagen::gen_regression_problem(n, &sigma, 2, 2.0, &noise, datagen::RegressionSeeds::from_master(Seed(23)))
            .unwrap();
        let c = EstimatorConstants::with_scale(2.0);
        let (beta, res) = estimate_sparse_regression(&p, &c, &SolverConfig::default()).unwrap();
        assert_eq!(res.reference_dominated, Some(true));
        let inst = Instance::Regression { problem: &p, constants: c };
        let params = CertificateParams { alpha: 1.0, lambda: 0.25, trials: 300, seed: Seed(24) };
        let cert = assemble_certificate(&inst, &beta, &params).unwrap();
        assert!(!cert.implication_violated());
        assert!(cert.conditions.all(), "{}", cert.to_report());
        assert!(cert.cone_membership && cert.error_within_radius);
        assert!(cert.to_report().contains("radius_formula_ok = true"));
    }
}
