//! Regularized Huber-loss estimators for sparse linear regression and
//! principal component analysis when the noise contains oblivious outliers.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod huber;
pub mod linalg;
pub mod lowerbound;
pub mod prox;
pub mod solver;
pub mod verification;

pub use datagen::{NoiseFamily, NoiseSpec, Seed, SignalKind, SignalSpec};
pub use error::{Error, Result};
pub use huber::{HuberParams, Residuals, Shape};
pub use linalg::{DenseMatrix, DenseVector};
pub use prox::{MaxNormBall, RegWeight};
pub use solver::{CompositeProblem, Regularizer, SolveResult, SolverConfig};
pub use estimators::{DesignProps, EstimatorConstants, PcaProblem, PcaTruth, RegressionProblem, RegressionTruth};
