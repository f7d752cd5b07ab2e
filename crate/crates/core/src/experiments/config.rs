use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{NoiseFamily, NoiseSpec, Seed};
use crate::error::{Error, Result};
use crate::estimators::EstimatorConstants;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    RegressionNSweep,
    RegressionAlphaSweep,
    RegressionGaussianDesign,
    PcaNSweep,
    PcaAlphaSweep,
    MatrixCompletion,
    LowerboundPhase,
    MetaCertificate,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::RegressionNSweep,
        Scenario::RegressionAlphaSweep,
        Scenario::RegressionGaussianDesign,
        Scenario::PcaNSweep,
        Scenario::PcaAlphaSweep,
        Scenario::MatrixCompletion,
        Scenario::LowerboundPhase,
        Scenario::MetaCertificate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::RegressionNSweep => "regression_n_sweep",
            Scenario::RegressionAlphaSweep => "regression_alpha_sweep",
            Scenario::RegressionGaussianDesign => "regression_gaussian_design",
            Scenario::PcaNSweep => "pca_n_sweep",
            Scenario::PcaAlphaSweep => "pca_alpha_sweep",
            Scenario::MatrixCompletion => "matrix_completion",
            Scenario::LowerboundPhase => "lowerbound_phase",
            Scenario::MetaCertificate => "meta_certificate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }

    pub fn is_regression(self) -> bool {
        matches!(
            self,
            Scenario::RegressionNSweep | Scenario::RegressionAlphaSweep | Scenario::RegressionGaussianDesign
        )
    }

    pub fn is_pca(self) -> bool {
        matches!(self, Scenario::PcaNSweep | Scenario::PcaAlphaSweep | Scenario::MatrixCompletion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Regression,
    Pca,
}

/// Model parameters shared by all scenarios; each scenario reads the ones
/// it needs. Any numeric field can be swept from `[grid]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub r: usize,
    pub alpha: f64,
    /// When set, the lower-bound scenario uses `alpha_factor * sqrt(r / n)`.
    pub alpha_factor: Option<f64>,
    pub zeta: f64,
    pub rho_over_n: f64,
    pub magnitude: f64,
    pub outlier_scale: f64,
    pub noise_family: NoiseFamily,
    /// Toeplitz correlation `c^|i - j|` of the Gaussian design.
    pub design_correlation: f64,
    pub epsilon: f64,
    pub problem: ProblemKind,
    pub cert_trials: usize,
    /// RE constant for the certificate; defaults to `sigma_min(Sigma) / 4`.
    pub lambda: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n: 500,
            d: 100,
            k: 5,
            r: 2,
            alpha: 0.5,
            alpha_factor: None,
            zeta: 1.0,
            rho_over_n: 1.0,
            magnitude: 2.0,
            outlier_scale: 1.0,
            noise_family: NoiseFamily::SymmetricMixture,
            design_correlation: 0.0,
            epsilon: 0.5,
            problem: ProblemKind::Regression,
            cert_trials: 1000,
            lambda: None,
        }
    }
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("grid value {v} for {key:?} must be a non-negative integer")))
    }
}

impl ModelParams {
    pub const GRID_KEYS: [&'static str; 14] = [
        "alpha",
        "alpha_factor",
        "cert_trials",
        "d",
        "design_correlation",
        "epsilon",
        "k",
        "lambda",
        "magnitude",
        "n",
        "outlier_scale",
        "r",
        "rho_over_n",
        "zeta",
    ];

    pub fn set(&mut self, key: &str, v: f64) -> Result<()> {
        match key {
            "n" => self.n = as_count(key, v)?,
            "d" => self.d = as_count(key, v)?,
            "k" => self.k = as_count(key, v)?,
            "r" => self.r = as_count(key, v)?,
            "cert_trials" => self.cert_trials = as_count(key, v)?,
            "alpha" => self.alpha = v,
            "alpha_factor" => self.alpha_factor = Some(v),
            "zeta" => self.zeta = v,
            "rho_over_n" => self.rho_over_n = v,
            "magnitude" => self.magnitude = v,
            "outlier_scale" => self.outlier_scale = v,
            "design_correlation" => self.design_correlation = v,
            "epsilon" => self.epsilon = v,
            "lambda" => self.lambda = Some(v),
            _ => return Err(Error::Config(format!("{key:?} cannot be swept"))),
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec { family: self.noise_family, alpha: self.alpha, zeta: self.zeta, outlier_scale: self.outlier_scale, xi: None }
    }

    /// Inlier fraction used by the lower-bound scenario.
    pub fn lb_alpha(&self) -> f64 {
        match self.alpha_factor {
            Some(f) => f * (self.r as f64 / self.n as f64).sqrt(),
            None => self.alpha,
        }
    }
}

/// Post-run assertion evaluated on the rows of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// Log-log slope of the median of `y` against grid key `x`.
    Slope { x: String, y: String, min: f64, max: f64 },
    /// At every grid point, median of `y` at most the median of `bound`.
    MedianBelow { y: String, bound: String },
    /// Fraction of rows with `flag` set, over all points, at least `min`.
    FlagFraction { flag: String, min: f64 },
    /// Fraction of rows with `flag` at the smallest or largest value of `x`.
    FlagFractionAt { flag: String, x: String, at: Extreme, min: Option<f64>, max: Option<f64> },
    /// Fraction of rows with `flag` is non-decreasing in `x`, up to
    /// `sigmas` binomial standard errors between neighbours.
    MonotoneFlag { flag: String, x: String, sigmas: f64 },
    /// No row carries an error status.
    NoErrors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extreme {
    Lowest,
    Highest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials_per_point: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Record wall-clock times; off by default so output is reproducible.
    #[serde(default)]
    pub timing: bool,
    pub grid: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub estimator: EstimatorConstants,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, rename = "check")]
    pub checks: Vec<Check>,
}

fn default_delta() -> f64 {
    0.05
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> Seed {
        Seed(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Precondition(m) => Error::Config(m),
            other => other,
        };
        if self.grid.is_empty() || self.grid.values().any(|v| v.is_empty()) {
            return Err(Error::Config("grid must have at least one key and no empty lists".into()));
        }
        if self.trials_per_point < 1 {
            return Err(Error::Config("trials_per_point must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        for p in self.points()? {
            let m = self.model_at(&p)?;
            if self.scenario != Scenario::LowerboundPhase && self.scenario != Scenario::MatrixCompletion {
                m.noise().validate().map_err(cfg)?;
            }
            if m.n < 1 {
                return Err(Error::Config("n must be at least 1".into()));
            }
        }
        self.estimator.validate().map_err(cfg)?;
        self.solver.validate().map_err(cfg)?;
        Ok(())
    }

    /// Cartesian product of the grid, keys in alphabetical order, the first
    /// key varying slowest.
    pub fn points(&self) -> Result<Vec<BTreeMap<String, f64>>> {
        for key in self.grid.keys() {
            if !ModelParams::GRID_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("{key:?} cannot be swept")));
            }
        }
        let mut points = vec![BTreeMap::new()];
        for (key, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(key.clone(), v);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }

    pub fn model_at(&self, point: &BTreeMap<String, f64>) -> Result<ModelParams> {
        let mut m = self.model;
        for (k, &v) in point {
            m.set(k, v)?;
        }
        Ok(m)
    }

    /// Trials needed to resolve a violation at level `delta`.
    pub fn min_trials_for_delta(&self) -> usize {
        (10.0 / self.delta).ceil() as usize
    }
}
