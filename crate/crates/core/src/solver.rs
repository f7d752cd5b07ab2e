//! Composite minimization of a smooth loss plus one prox-friendly
//! regularizer, optionally over a max-norm ball.
//!
//! Points are flat vectors; matrix problems use column-major storage and
//! carry their shape in the regularizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::prox::{self, MaxNormBall};

/// Largest step multiplier the three-operator splitting accepts; it
/// converges for any value below 2.
pub const MAX_SPLIT_STEP: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Threshold on the relative fixed-point residual.
    pub rel_tol: f64,
    /// Multiplier on `1 / Lipschitz` for the first step. The splitting
    /// solver uses it as a fixed step, capped at [`MAX_SPLIT_STEP`].
    pub initial_step: f64,
    /// Step shrink factor used by backtracking.
    pub backtrack_factor: f64,
    /// Relative slack allowed when comparing against a reference objective.
    pub objective_reference_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            rel_tol: 1e-7,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            objective_reference_margin: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::pre("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::pre(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::pre(format!("initial_step must be positive, got {}", self.initial_step)));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::pre(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if !(self.objective_reference_margin >= 0.0) {
            return Err(Error::pre("objective_reference_margin must be non-negative"));
        }
        Ok(())
    }
}

/// Nonsmooth term of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    None,
    L1 { gamma: f64 },
    /// `gamma * ||L||_nuc` for a column-major `rows x cols` matrix.
    Nuclear { gamma: f64, rows: usize, cols: usize },
}

impl Regularizer {
    pub fn value(&self, x: &DenseVector) -> Result<f64> {
        match *self {
            Regularizer::None => Ok(0.0),
            Regularizer::L1 { gamma } => Ok(gamma * linalg::l1_norm(x.as_slice())),
            Regularizer::Nuclear { gamma, rows, cols } => {
                if gamma == 0.0 {
                    return Ok(0.0);
                }
                Ok(gamma * linalg::nuclear_norm(&linalg::unflatten(x, rows, cols))?)
            }
        }
    }

    /// Prox of `step * self`.
    pub fn prox(&self, x: &DenseVector, step: f64) -> Result<DenseVector> {
        match *self {
            Regularizer::None => Ok(x.clone()),
            Regularizer::L1 { gamma } => {
                let mut out = x.clone();
                prox::prox_l1_in_place(out.as_mut_slice(), step * gamma);
                Ok(out)
            }
            Regularizer::Nuclear { gamma, rows, cols } => {
                let m = prox::prox_nuclear(&linalg::unflatten(x, rows, cols), step * gamma)?;
                Ok(linalg::flatten(&m))
            }
        }
    }
}

/// Evaluates the smooth part at a point; writes the gradient when asked.
pub type SmoothFn<'a> = Box<dyn Fn(&DenseVector, Option<&mut DenseVector>) -> Result<f64> + Send + Sync + 'a>;

pub struct CompositeProblem<'a> {
    pub dim: usize,
    pub smooth: SmoothFn<'a>,
    pub regularizer: Regularizer,
    pub constraint: Option<MaxNormBall>,
    /// Lipschitz constant of the smooth gradient, if known.
    pub lipschitz: f64,
}

impl std::fmt::Debug for CompositeProblem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dim", &self.dim)
            .field("regularizer", &self.regularizer)
            .field("constraint", &self.constraint)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl CompositeProblem<'_> {
    pub fn objective(&self, x: &DenseVector) -> Result<f64> {
        self.check_dim(x)?;
        let f = (self.smooth)(x, None)?;
        Ok(f + self.regularizer.value(x)?)
    }

    pub fn is_feasible(&self, x: &DenseVector) -> bool {
        match self.constraint {
            None => true,
            Some(ball) => ball.contains(x.as_slice(), 1e-12 * ball.radius().max(1.0)),
        }
    }

    fn check_dim(&self, x: &DenseVector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::pre(format!("point has length {}, problem dimension is {}", x.len(), self.dim)));
        }
        Ok(())
    }

    fn smooth_grad(&self, x: &DenseVector, grad: &mut DenseVector) -> Result<f64> {
        (self.smooth)(x, Some(grad))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub point: DenseVector,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Set by callers that compare against a known reference point.
    pub reference_dominated: Option<bool>,
    /// Objective after each iteration (accelerated solver only).
    pub history: Vec<f64>,
}

fn finite_or_diverged(value: f64, iterations: usize, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Diverged { iterations, reason: format!("{what} became {value}") })
    }
}

fn relative_change(a: &DenseVector, b: &DenseVector, scale: &DenseVector) -> f64 {
    (a - b).norm() / scale.norm().max(1.0)
}

/// One proximal gradient step from `x` with step `1 / lip`.
fn prox_grad_step(problem: &CompositeProblem<'_>, x: &DenseVector, grad: &DenseVector, lip: f64) -> Result<DenseVector> {
    let forward = x - grad / lip;
    problem.regularizer.prox(&forward, 1.0 / lip)
}

/// Monotone accelerated proximal gradient with backtracking.
///
/// A rejected step (objective increase) resets the momentum, so the
/// recorded objective sequence is non-increasing.
pub fn solve_fista(problem: &CompositeProblem<'_>, config: &SolverConfig, start: &DenseVector) -> Result<SolveResult> {
    config.validate()?;
    problem.check_dim(start)?;
    if problem.constraint.is_some() {
        return Err(Error::pre("accelerated solver does not handle a max-norm constraint; use solve_split"));
    }
    if !(problem.lipschitz > 0.0) || !problem.lipschitz.is_finite() {
        return Err(Error::pre(format!("Lipschitz estimate must be positive, got {}", problem.lipschitz)));
    }

    let mut lip = problem.lipschitz / config.initial_step;
    let mut grad = DenseVector::zeros(problem.dim);
    let mut x = start.clone();
    let fx_smooth = finite_or_diverged(problem.smooth_grad(&x, &mut grad)?, 0, "objective")?;
    let mut fx = finite_or_diverged(fx_smooth + problem.regularizer.value(&x)?, 0, "objective")?;

    let residual_at = |x: &DenseVector, grad: &DenseVector, lip: f64| -> Result<f64> {
        let step = prox_grad_step(problem, x, grad, lip)?;
        Ok(relative_change(&step, x, x))
    };

    let mut residual = residual_at(&x, &grad, lip)?;
    let mut history = Vec::new();
    if residual <= config.rel_tol {
        return Ok(SolveResult {
            point: x,
            objective: fx,
            iterations: 0,
            residual,
            converged: true,
            reference_dominated: None,
            history,
        });
    }

    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=config.max_iters {
        iterations = k;
        let fy = finite_or_diverged(problem.smooth_grad(&y, &mut grad)?, k, "smooth loss")?;

        let (z, fz_smooth) = loop {
            let z = prox_grad_step(problem, &y, &grad, lip)?;
            let diff = &z - &y;
            let fz = (problem.smooth)(&z, None)?;
            let model = fy + grad.dot(&diff) + 0.5 * lip * diff.norm_squared();
            if fz.is_finite() && fz <= model + 1e-12 * fy.abs().max(1.0) {
                break (z, fz);
            }
            lip /= config.backtrack_factor;
            if !lip.is_finite() {
                return Err(Error::Diverged { iterations: k, reason: "backtracking step underflowed".into() });
            }
        };
        let fz = finite_or_diverged(fz_smooth + problem.regularizer.value(&z)?, k, "objective")?;
        let proxy = relative_change(&z, &y, &y);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fz <= fx {
            let x_prev = std::mem::replace(&mut x, z);
            fx = fz;
            y = &x + (&x - &x_prev) * ((t - 1.0) / t_next);
            t = t_next;
        } else {
            y = x.clone();
            t = 1.0;
        }
        history.push(fx);

        if proxy <= config.rel_tol {
            let mut gx = DenseVector::zeros(problem.dim);
            problem.smooth_grad(&x, &mut gx)?;
            residual = residual_at(&x, &gx, lip)?;
            if residual <= config.rel_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        let mut gx = DenseVector::zeros(problem.dim);
        problem.smooth_grad(&x, &mut gx)?;
        residual = residual_at(&x, &gx, lip)?;
    }
    Ok(SolveResult {
        point: x,
        objective: fx,
        iterations,
        residual,
        converged,
        reference_dominated: None,
        history,
    })
}

/// Three-operator splitting: gradient step on the smooth part, prox of the
/// regularizer, projection onto the max-norm ball.
///
/// The returned point is the better of the two (exactly feasible) final
/// iterates.
pub fn solve_split(problem: &CompositeProblem<'_>, config: &SolverConfig, start: &DenseVector) -> Result<SolveResult> {
    config.validate()?;
    problem.check_dim(start)?;
    let ball = problem
        .constraint
        .ok_or_else(|| Error::pre("splitting solver requires a max-norm constraint"))?;
    if !(problem.lipschitz > 0.0) || !problem.lipschitz.is_finite() {
        return Err(Error::pre(format!("Lipschitz estimate must be positive, got {}", problem.lipschitz)));
    }
    let multiplier = config.initial_step.min(MAX_SPLIT_STEP);
    let step = multiplier / problem.lipschitz;

    let mut z = start.clone();
    let mut grad = DenseVector::zeros(problem.dim);
    let mut x_g = z.clone();
    let mut x_h = z.clone();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=config.max_iters {
        iterations = k;
        x_g = z.clone();
        ball.clamp_in_place(x_g.as_mut_slice());
        finite_or_diverged(problem.smooth_grad(&x_g, &mut grad)?, k, "smooth loss")?;
        let reflected = &x_g * 2.0 - &z - &grad * step;
        x_h = problem.regularizer.prox(&reflected, step)?;
        let delta = &x_h - &x_g;
        // Divided by the step so the tolerance does not depend on it.
        residual = finite_or_diverged(delta.norm() / (multiplier * x_g.norm().max(1.0)), k, "residual")?;
        z += delta;
        if residual <= config.rel_tol {
            converged = true;
            break;
        }
    }

    ball.clamp_in_place(x_h.as_mut_slice());
    let obj_g = finite_or_diverged(problem.objective(&x_g)?, iterations, "objective")?;
    let obj_h = finite_or_diverged(problem.objective(&x_h)?, iterations, "objective")?;
    let (point, objective) = if obj_h < obj_g { (x_h, obj_h) } else { (x_g, obj_g) };
    Ok(SolveResult {
        point,
        objective,
        iterations,
        residual,
        converged,
        reference_dominated: None,
        history: Vec::new(),
    })
}

/// Whether `candidate` is no worse than `reference` in composite objective,
/// up to `margin * max(1, |objective(reference)|)`.
pub fn certify_against_reference(
    problem: &CompositeProblem<'_>,
    candidate: &DenseVector,
    reference: &DenseVector,
    margin: f64,
) -> Result<bool> {
    if !problem.is_feasible(candidate) {
        return Err(Error::pre("candidate point violates the max-norm constraint"));
    }
    if !problem.is_feasible(reference) {
        return Err(Error::pre("reference point violates the max-norm constraint"));
    }
    let c = problem.objective(candidate)?;
    let r = problem.objective(reference)?;
    Ok(c <= r + margin * r.abs().max(1.0))
}

/// Convenience wrapper for matrix-shaped points.
pub fn matrix_point(m: &DenseMatrix) -> DenseVector {
    linalg::flatten(m)
}
