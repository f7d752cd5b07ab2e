//! Weak-recovery phase experiment on the hard instance family: flat block
//! low-rank signal plus even-integer noise whose zero mass is `alpha`.
//!
//! The experiment only shows the estimator failing below the threshold; it
//! says nothing about other algorithms.

use rayon::prelude::*;

use crate::datagen::{self, Seed};
use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorConstants, PcaProblem};
use crate::solver::SolverConfig;

/// Noise magnitude and entry bound of the construction.
pub const LB_ZETA: f64 = 1.0;
pub const LB_RHO_OVER_N: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundSpec {
    pub n: usize,
    pub r: usize,
    pub xi: f64,
    /// Success threshold on `||L_hat - L*||_F / n`.
    pub epsilon: f64,
    pub trials: usize,
}

impl LowerBoundSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 || self.r > self.n {
            return Err(Error::pre(format!("need 1 <= r <= n, got r = {}, n = {}", self.r, self.n)));
        }
        check_xi(self.n, self.r, self.xi)?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::pre(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.trials < 1 {
            return Err(Error::pre("trials must be at least 1"));
        }
        Ok(())
    }

    /// `xi <= 1/2`, where the impossibility argument applies.
    pub fn in_theorem_regime(&self) -> bool {
        self.xi <= 0.5
    }
}

fn check_xi(n: usize, r: usize, xi: f64) -> Result<()> {
    let t = xi * (r as f64 / n as f64).sqrt();
    if !(xi > 0.0) || !(t <= 1.0) {
        return Err(Error::pre(format!("need 0 < xi sqrt(r/n) <= 1, got xi = {xi}, n = {n}, r = {r}")));
    }
    Ok(())
}

/// Zero mass of the noise law, `xi sqrt(r) / (2 sqrt(n) - xi sqrt(r))`.
pub fn lb_alpha_of_xi(n: usize, r: usize, xi: f64) -> Result<f64> {
    if r < 1 || r > n {
        return Err(Error::pre(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    check_xi(n, r, xi)?;
    let a = xi * (r as f64).sqrt();
    Ok(a / (2.0 * (n as f64).sqrt() - a))
}

/// Inverse of [`lb_alpha_of_xi`]: `xi = 2 sqrt(n) alpha / (sqrt(r) (1 + alpha))`.
pub fn lb_xi_of_alpha(n: usize, r: usize, alpha: f64) -> Result<f64> {
    if r < 1 || r > n {
        return Err(Error::pre(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::pre(format!("alpha {alpha} is not realizable by the construction")));
    }
    Ok(2.0 * (n as f64).sqrt() * alpha / ((r as f64).sqrt() * (1.0 + alpha)))
}

/// Draws `(L*, N)` and returns the instance `Y = L* + N`.
pub fn gen_lb_instance(n: usize, r: usize, xi: f64, seed: Seed) -> Result<PcaProblem> {
    let l = datagen::gen_flat_lowrank(n, r, LB_RHO_OVER_N, seed.derive(0))?;
    let noise = datagen::gen_lb_noise(n, r, xi, seed.derive(1))?;
    PcaProblem::new(&l + noise, LB_RHO_OVER_N, LB_ZETA)?.with_truth(l, r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTrial {
    /// `||L_hat - L*||_F / n`.
    pub relative_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn run_phase_trial(
    n: usize,
    r: usize,
    xi: f64,
    constants: &EstimatorConstants,
    solver: &SolverConfig,
    seed: Seed,
) -> Result<PhaseTrial> {
    let p = gen_lb_instance(n, r, xi, seed)?;
    let (l_hat, res) = estimators::estimate_pca(&p, constants, solver)?;
    Ok(PhaseTrial {
        relative_error: estimators::frobenius_error(&p, &l_hat)? / n as f64,
        iterations: res.iterations,
        converged: res.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub alpha: f64,
    pub xi: f64,
    pub mean_relative_error: f64,
    pub success_fraction: f64,
    pub trials: Vec<PhaseTrial>,
}

/// For each `alpha`, runs `spec.trials` independent instances and reports
/// the mean relative error and the fraction at or below `spec.epsilon`.
/// `spec.xi` is ignored; each `alpha` determines its own.
pub fn run_phase_experiment(
    spec: &LowerBoundSpec,
    alphas: &[f64],
    constants: &EstimatorConstants,
    solver: &SolverConfig,
    seed: Seed,
) -> Result<Vec<PhaseRow>> {
    let xis = alphas
        .iter()
        .map(|&a| lb_xi_of_alpha(spec.n, spec.r, a))
        .collect::<Result<Vec<_>>>()?;
    LowerBoundSpec { xi: xis.iter().copied().fold(f64::MIN_POSITIVE, f64::max), ..*spec }.validate()?;
    alphas
        .iter()
        .zip(xis)
        .enumerate()
        .map(|(i, (&alpha, xi))| {
            let trials = (0..spec.trials)
                .into_par_iter()
                .map(|t| run_phase_trial(spec.n, spec.r, xi, constants, solver, seed.derive(i as u64).derive(t as u64)))
                .collect::<Result<Vec<_>>>()?;
            let m = trials.len() as f64;
            Ok(PhaseRow {
                alpha,
                xi,
                mean_relative_error: trials.iter().map(|t| t.relative_error).sum::<f64>() / m,
                success_fraction: trials.iter().filter(|t| t.relative_error <= spec.epsilon).count() as f64 / m,
                trials,
            })
        })
        .collect()
}
