//! Gaussian graphical model edge discovery with false discovery rate control.
//!
//! Each variable is regressed on all others (Lasso or Dantzig selector), the
//! residual covariances are bias-corrected and studentized into one
//! statistic per pair, and a single threshold on those statistics is chosen
//! so that the estimated false discovery proportion stays below `α`.
//!
//! The pipeline, bottom up:
//!
//! - [`mathcore`]: normal CDF/quantile, Cholesky, sample covariance.
//! - [`graphs`]: band, hub and Erdős–Rényi precision matrices and a seeded sampler.
//! - [`solvers`]: node-wise Lasso (coordinate descent) and Dantzig selector (simplex).
//! - [`teststat`]: the pair statistics `T_ij` and `T̂_ij`.
//! - [`gfc`]: threshold search, penalty tuning and evaluation.
//! - [`experiment`]: seeded replications, calibration runs and their reports.

pub mod data;
pub mod error;
pub mod experiment;
pub mod gfc;
pub mod graphs;
pub mod mathcore;
pub mod solvers;
pub mod teststat;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use gfc::{evaluate, gfc_threshold, run_gfc, tune_delta, EvaluationReport, GfcRun, GfcSelection, TuningResult};
pub use graphs::{GraphFamily, PrecisionModel};
pub use solvers::{fit_all_nodes, NodeRegressionSet, SolverKind};
pub use teststat::{studentize, TestStatistics};
