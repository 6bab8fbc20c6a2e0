//! Robust correlation-matrix estimation for elliptical copula models via
//! Kendall's tau: plug-in and factor-model estimators, their finite-sample
//! bounds, and a Monte Carlo harness to check those bounds.

pub mod bounds;
pub mod elementary;
pub mod error;
pub mod factor;
pub mod harness;
pub mod io;
pub mod kendall;
pub mod linalg;
pub mod refined;
mod serde_matrix;
pub mod simulate;
pub mod transform;

pub use bounds::{bound_report, f, BoundReport, SigmaBounds, TauBounds};
pub use elementary::{estimate_elementary, ElementaryEstimate};
pub use error::{Error, Result};
pub use factor::FactorDecomposition;
pub use harness::{ExperimentConfig, ExperimentResult};
pub use kendall::{kendall_tau_matrix, KendallKind, KendallMatrix, SampleMatrix};
pub use refined::{solve_refined, SolverOptions, SolverResult, TangentSpace};
pub use simulate::{CopulaSpec, FactorSpec};
pub use transform::{project_psd, sine_transform, CorrelationMatrix, Provenance};
