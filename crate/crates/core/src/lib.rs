//! De-biased least-squares and two-stage estimation of multi-horizon
//! Granger-causal coefficients in sparse high-dimensional VAR models.
//!
//! The pipeline is: ingest a [`TimeSeriesPanel`], fit the VAR row-wise with
//! an ℓ1 penalty ([`regularized`]), build model-implied covariances
//! ([`covariance`]), estimate the local-projection coefficient of interest
//! with a de-biased estimator ([`debias`]) and test it with a Wald statistic
//! ([`inference`]). [`montecarlo`] and [`network`] drive that pipeline over
//! replications and over all series pairs.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod debias;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod montecarlo;
pub mod network;
pub mod pipeline;
pub mod regularized;
pub mod seed;
pub mod var;

pub use error::{Error, Result};
pub use var::{TimeSeriesPanel, VarModel};
