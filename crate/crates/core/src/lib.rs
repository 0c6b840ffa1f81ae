//! Entropy-SGD and Entropy-SGLD training of small feed-forward classifiers,
//! with PAC-Bayes, differentially private PAC-Bayes and Hoeffding/Chernoff
//! style generalization bounds.
//!
//! - [`nn`]: networks, bounded losses, empirical risk and backpropagation.
//! - [`optim`]: SGD, SGLD, Entropy-SGD and Entropy-SGLD.
//! - [`gibbs`]: sampling the local Gibbs distribution, Gibbs/mean classifier
//!   errors and exact 1-D quadrature oracles.
//! - [`bounds`]: binary kl, kl inversion, bound arithmetic, privacy budgets and
//!   Monte Carlo KL estimation.
//! - [`harness`]: data loading, experiment configuration, runs and sweeps.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod nn;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
