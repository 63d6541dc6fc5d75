//! Liu-type shrinkage estimation for negative binomial (NB2) regression
//! under multicollinearity.
//!
//! The crate covers the NB2 model and its IRLS fit, the MLE / ridge (RR) /
//! Liu (LE) / Liu-type (LT) estimator family, shrinkage-parameter
//! selectors, closed-form risk and MMSE comparison checks, a Monte Carlo
//! engine, and CSV/report plumbing for the `liutype-nb` command-line tool.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
mod dataset;
pub mod error;
pub mod estimators;
pub mod irls_fit;
pub mod mc_sim;
pub mod nb_model;
pub mod risk_analysis;
pub mod shrinkage_selectors;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use estimators::{EigenSystem, EstimatorFit, EstimatorKind, ShrinkageParams, ShrinkageSystem};
pub use irls_fit::{fit_mle, FitOptions, InitRule, MleFit};
pub use nb_model::{MeanVector, Overdispersion};
