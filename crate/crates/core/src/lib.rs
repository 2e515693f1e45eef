//! Dependent multiplier bootstrap for the two-sided sequential empirical
//! copula process of a serially dependent multivariate sample.
//!
//! Module map:
//!
//! - [`kernels`]: weight and covariance kernels with their analytic constants.
//! - [`data`]: the observation matrix and delimited-text I/O.
//! - [`empirical`]: ranks, pseudo-observations, empirical copulas and the
//!   sequential empirical (copula) processes.
//! - [`multipliers`]: moving-average and covariance-matrix generation of
//!   dependent multiplier sequences.
//! - [`bootstrap`]: partial-derivative estimators and the multiplier replicate
//!   processes, including change-point surfaces.
//! - [`bandwidth`]: lag-window estimators and the automatic bandwidth.
//! - [`inference`]: test statistics, multiplier p-values and the change-point
//!   test.
//! - [`datagen`]: copula samplers and the serially dependent data models.
//! - [`experiments`]: Monte Carlo protocols (bandwidth tables, quantile MSE and
//!   IMSE sweeps).
//! - [`par`]: rayon dispatch with a sequential fallback.

pub mod bandwidth;
pub mod bootstrap;
pub mod data;
pub mod datagen;
pub mod empirical;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod kernels;
pub mod multipliers;
pub mod par;
mod quadrature;
pub mod rng;

pub use bandwidth::{estimate_ell_opt, select_lag_truncation, Aggregation, BandwidthEstimate};
pub use bootstrap::{PartialDerivEstimator, ReplicateDesign};
pub use data::DataMatrix;
pub use datagen::{CopulaSpec, DataModel, ModelKind};
pub use empirical::{EvalGrid, PseudoObsWindow};
pub use error::{Error, Result};
pub use inference::{changepoint_test, BootstrapResult, ChangePointConfig, EllPolicy};
pub use kernels::{KernelFamily, KernelRole, KernelSpec, PhiConstants};
pub use multipliers::{BaseLaw, MultiplierBatch, MultiplierConfig, MultiplierMethod};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
