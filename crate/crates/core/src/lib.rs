//! Imputation-balanced GAN training for imbalanced multivariate
//! time-series classification.
//!
//! The crate is organised bottom-up:
//!
//! - [`ndcore`]: arrays, reverse-mode differentiation, Adam.
//! - [`dataio`]: datasets, long-CSV ingestion, priors, imbalance injection,
//!   standardization, synthetic AR(1) data.
//! - [`balance`]: weighted resampling, MCAR masks, masked vectors.
//! - [`nets`]: generator, discriminator and classifier networks.
//! - [`trainer`]: the joint generator/discriminator/classifier objective and loop.
//! - [`baselines`]: class weights, up/down-sampling, SMOTE.
//! - [`oracle`]: exact finite-space optimal classifiers.
//! - [`metrics`]: balanced accuracy, macro F1, average precision.
//! - [`experiment`]: config files, replicate grids, result records.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod baselines;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod ndcore;
pub mod nets;
pub mod oracle;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
