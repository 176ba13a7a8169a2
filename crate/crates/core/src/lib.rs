//! Sequential (online) and retrospective structural-break detection for
//! stationary time-series regressions.
//!
//! The crate is organised bottom-up:
//!
//! - [`timeseries`]: series ingestion, differencing and historical/monitoring splits.
//! - [`linreg`]: OLS, HAC covariance, recursive and moving-window estimates.
//! - [`garch`]: Gaussian quasi-MLE for GARCH(1,1) and AR(1)-GARCH(1,1).
//! - [`boundaries`]: boundary functions `b1`..`b9`, admissibility checks and
//!   closed-form crossing probabilities.
//! - [`detectors`]: streaming RE, ME, OLS-CUSUM, OLS-MOSUM and OLS-CUSUM-SQ detectors.
//! - [`monitor`]: the stopping-time engine coupling a detector with a boundary.
//! - [`critvals`]: critical values by simulation of the limiting Brownian functionals.
//! - [`montecarlo`]: size, power and run-length experiments.
//! - [`retro`]: full-sample break estimation (least squares, dynamic programming, sup-F).

pub mod boundaries;
pub mod critvals;
pub mod detectors;
mod error;
pub mod garch;
pub mod linreg;
mod matrix;
pub mod monitor;
pub mod montecarlo;
pub mod optim;
pub mod retro;
pub mod rng;
pub mod timeseries;

pub use boundaries::{Boundary, BoundaryKind};
pub use detectors::{DetectorKind, DetectorPath, DetectorSpec};
pub use error::{Error, Result};
pub use garch::{GarchFit, GarchParams};
pub use linreg::{Design, FitResult};
pub use monitor::{ModelKind, MonitorResult};
pub use montecarlo::{DgpSpec, McReport};
pub use timeseries::{Frequency, SampleSplit, TimeSeries};
