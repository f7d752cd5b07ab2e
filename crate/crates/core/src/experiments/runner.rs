use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::{self, RegressionSeeds, Seed};
use crate::error::{Error, Result};
use crate::estimators::{self, PcaProblem, RegressionProblem};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::lowerbound;
use crate::solver::{self, SolveResult};
use crate::verification::{self, CertificateParams, Instance, MetaCertificate};

use super::config::{ExperimentSpec, ModelParams, ProblemKind, Scenario};

pub const STATUS_OK: &str = "ok";

/// One (grid point, trial) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub point: BTreeMap<String, f64>,
    pub trial: usize,
    pub metrics: BTreeMap<String, f64>,
    pub iterations: Option<usize>,
    pub flags: BTreeMap<String, bool>,
    /// `ok` or the error tag of the failure.
    pub status: String,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

#[derive(Default)]
struct Outcome {
    metrics: BTreeMap<String, f64>,
    flags: BTreeMap<String, bool>,
    iterations: Option<usize>,
}

impl Outcome {
    fn metric(&mut self, k: &str, v: f64) {
        self.metrics.insert(k.to_owned(), v);
    }

    fn flag(&mut self, k: &str, v: bool) {
        self.flags.insert(k.to_owned(), v);
    }
}

/// `c^|i - j|`.
pub fn toeplitz_covariance(d: usize, c: f64) -> Result<DenseMatrix> {
    if !(c.abs() < 1.0) {
        return Err(Error::Config(format!("design correlation must lie in (-1, 1), got {c}")));
    }
    Ok(DenseMatrix::from_fn(d, d, |i, j| c.powi((i as i32 - j as i32).abs())))
}

fn regression_instance(m: &ModelParams, seed: Seed) -> Result<(RegressionProblem, DenseMatrix)> {
    let sigma = toeplitz_covariance(m.d, m.design_correlation)?;
    let p = datagen::gen_regression_problem(m.n, &sigma, m.k, m.magnitude, &m.noise(), RegressionSeeds::from_master(seed))?;
    Ok((p, sigma))
}

fn sigma_min(sigma: &DenseMatrix) -> f64 {
    sigma.clone().symmetric_eigen().eigenvalues.min()
}

/// A generated instance with its ground truth.
#[derive(Debug, Clone)]
pub enum Dataset {
    Regression { problem: RegressionProblem, sigma: DenseMatrix },
    Pca { problem: PcaProblem, observed: Option<Vec<bool>> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Vector(DenseVector),
    Matrix(DenseMatrix),
}

impl Estimate {
    pub fn flat(&self) -> DenseVector {
        match self {
            Estimate::Vector(v) => v.clone(),
            Estimate::Matrix(m) => solver::matrix_point(m),
        }
    }
}

/// Instance of the scenario at model `m`.
pub fn generate(spec: &ExperimentSpec, m: &ModelParams, seed: Seed) -> Result<Dataset> {
    let regression = |seed| regression_instance(m, seed).map(|(problem, sigma)| Dataset::Regression { problem, sigma });
    let pca = |problem| Dataset::Pca { problem, observed: None };
    match spec.scenario {
        s if s.is_regression() => regression(seed),
        Scenario::MatrixCompletion => {
            let (problem, observed) =
                datagen::gen_matrix_completion_scenario(m.n, m.r, m.alpha, m.zeta, m.rho_over_n, seed)?;
            Ok(Dataset::Pca { problem, observed: Some(observed) })
        }
        Scenario::LowerboundPhase => {
            let xi = lowerbound::lb_xi_of_alpha(m.n, m.r, m.lb_alpha())?;
            lowerbound::LowerBoundSpec { n: m.n, r: m.r, xi, epsilon: m.epsilon, trials: 1 }.validate()?;
            Ok(pca(lowerbound::gen_lb_instance(m.n, m.r, xi, seed)?))
        }
        Scenario::MetaCertificate if m.problem == ProblemKind::Regression => regression(seed),
        _ => Ok(pca(datagen::gen_pca_problem(m.n, m.r, m.rho_over_n, &m.noise(), seed)?)),
    }
}

/// Instance of job `(point, trial)` together with its model parameters.
pub fn generate_job(spec: &ExperimentSpec, point_idx: usize, trial: usize) -> Result<(ModelParams, Dataset)> {
    let points = spec.points()?;
    let point = points
        .get(point_idx)
        .ok_or_else(|| Error::Config(format!("grid has {} points, asked for {point_idx}", points.len())))?;
    let m = spec.model_at(point)?;
    let ds = generate(spec, &m, job_seed(spec.seed(), point_idx, trial))?;
    Ok((m, ds))
}

pub fn solve_dataset(spec: &ExperimentSpec, ds: &Dataset) -> Result<(Estimate, SolveResult)> {
    match ds {
        Dataset::Regression { problem, .. } => {
            let (b, r) = estimators::estimate_sparse_regression(problem, &spec.estimator, &spec.solver)?;
            Ok((Estimate::Vector(b), r))
        }
        Dataset::Pca { problem, .. } => {
            let (l, r) = estimators::estimate_pca(problem, &spec.estimator, &spec.solver)?;
            Ok((Estimate::Matrix(l), r))
        }
    }
}

pub fn certify_dataset(
    spec: &ExperimentSpec,
    m: &ModelParams,
    ds: &Dataset,
    estimate: &Estimate,
    seed: Seed,
) -> Result<MetaCertificate> {
    let (inst, lambda) = match ds {
        Dataset::Regression { problem, sigma } => (
            Instance::Regression { problem, constants: spec.estimator },
            m.lambda.unwrap_or_else(|| sigma_min(sigma) / 4.0),
        ),
        Dataset::Pca { problem, .. } => (Instance::Pca { problem, constants: spec.estimator }, 1.0),
    };
    let params = CertificateParams { alpha: m.alpha, lambda, trials: m.cert_trials, seed };
    verification::assemble_certificate(&inst, &estimate.flat(), &params)
}

fn solve_outcome(spec: &ExperimentSpec, m: &ModelParams, ds: &Dataset, est: &Estimate, res: &SolveResult) -> Result<Outcome> {
    let mut o = Outcome { iterations: Some(res.iterations), ..Default::default() };
    o.flag("converged", res.converged);
    o.flag("reference_dominated", res.reference_dominated == Some(true));
    match (ds, est) {
        (Dataset::Regression { problem, .. }, Estimate::Vector(beta)) => {
            o.metric("prediction_error", estimators::prediction_error(problem, beta)?);
            o.metric("parameter_error", estimators::parameter_error(problem, beta)?);
            o.metric("gamma", estimators::regression_gamma(problem, &spec.estimator));
            o.metric("rate_bound", 100.0 * m.k as f64 * (m.d as f64).ln() / (m.alpha * m.alpha * m.n as f64));
        }
        (Dataset::Pca { problem, observed }, Estimate::Matrix(l_hat)) => {
            let err = estimators::frobenius_error(problem, l_hat)?;
            o.metric("frobenius_error", err);
            o.metric("relative_error", err / (m.n as f64 * problem.rho_over_n));
            o.metric("gamma", estimators::pca_gamma(problem, &spec.estimator));
            if let Some(obs) = observed {
                o.metric("observed_fraction", obs.iter().filter(|b| **b).count() as f64 / obs.len() as f64);
            }
            if spec.scenario == Scenario::LowerboundPhase {
                let alpha = m.lb_alpha();
                let xi = lowerbound::lb_xi_of_alpha(m.n, m.r, alpha)?;
                o.metric("alpha_effective", alpha);
                o.metric("xi", xi);
                o.flag("in_theorem_regime", xi <= 0.5);
                o.flag("success", err / m.n as f64 <= m.epsilon);
            } else {
                o.metric("rate_bound", 10.0 * ((m.r * m.n) as f64).sqrt() / m.alpha * (m.zeta + m.rho_over_n));
            }
        }
        _ => return Err(Error::pre("estimate does not match the dataset")),
    }
    Ok(o)
}

fn certificate_outcome(cert: &MetaCertificate, iterations: usize) -> Outcome {
    let mut o = Outcome { iterations: Some(iterations), ..Default::default() };
    o.metric("cone_ratio", cert.cone_ratio);
    o.metric("error", cert.error);
    o.metric("gamma", cert.gamma);
    o.metric("gamma_measured", cert.gamma_measured);
    o.metric("kappa", cert.kappa);
    o.metric("kappa_nominal", cert.kappa_nominal);
    o.metric("radius", cert.r);
    o.metric("s", cert.s);
    o.metric("s_measured", cert.s_measured);
    o.flag("all_conditions", cert.conditions.all());
    o.flag("cone_membership", cert.cone_membership);
    o.flag("contraction", cert.conditions.contraction);
    o.flag("decomposability", cert.conditions.decomposability);
    o.flag("error_within_radius", cert.error_within_radius);
    o.flag("gradient", cert.conditions.gradient);
    o.flag("implication_violated", cert.implication_violated());
    o.flag("radius_bound", cert.conditions.radius);
    o.flag("reference_dominated", cert.reference_dominated);
    o.flag("rsc", cert.conditions.rsc);
    o.flag("rsc_vacuous", cert.rsc_vacuous);
    o
}

fn run_model(spec: &ExperimentSpec, m: &ModelParams, seed: Seed) -> Result<Outcome> {
    let ds = generate(spec, m, seed)?;
    let (est, res) = solve_dataset(spec, &ds)?;
    if spec.scenario == Scenario::MetaCertificate {
        let cert = certify_dataset(spec, m, &ds, &est, seed.derive(0xCE27))?;
        return Ok(certificate_outcome(&cert, res.iterations));
    }
    solve_outcome(spec, m, &ds, &est, &res)
}

/// Seed of job `(point, trial)`; independent of scheduling.
pub fn job_seed(master: Seed, point: usize, trial: usize) -> Seed {
    master.derive(point as u64).derive(trial as u64)
}

fn run_job(spec: &ExperimentSpec, point: &BTreeMap<String, f64>, point_idx: usize, trial: usize) -> ResultRow {
    let start = Instant::now();
    let seed = job_seed(spec.seed(), point_idx, trial);
    let outcome = spec.model_at(point).and_then(|m| run_model(spec, &m, seed));
    let wall_ms = if spec.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let (o, status) = match outcome {
        Ok(o) if o.metrics.values().all(|v| !v.is_nan()) => (o, STATUS_OK.to_owned()),
        Ok(_) => (Outcome::default(), "numeric".to_owned()),
        Err(e) => {
            log::warn!("{} point {point_idx} trial {trial}: {e}", spec.scenario.as_str());
            (Outcome::default(), e.tag().to_owned())
        }
    };
    ResultRow {
        scenario: spec.scenario.as_str().to_owned(),
        point: point.clone(),
        trial,
        metrics: o.metrics,
        iterations: o.iterations,
        flags: o.flags,
        status,
        wall_ms,
    }
}

/// Runs every (grid point, trial) job on the current rayon pool. Rows come
/// back sorted by (point index, trial); per-job failures are recorded in
/// the row status rather than aborting the run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let points = spec.points()?;
    let jobs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|p| (0..spec.trials_per_point).map(move |t| (p, t))).collect();
    let total = jobs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    Ok(jobs
        .into_par_iter()
        .map(|(p, t)| {
            let row = run_job(spec, &points[p], p, t);
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            log::info!("{} job {k}/{total} point {p} trial {t}: {}", row.scenario, row.status);
            row
        })
        .collect())
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ResultRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(spec))
}
