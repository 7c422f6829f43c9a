//! Consistency of permutation-based feature importance of binary classifiers
//! across learners, hyperparameters, sampling and time periods.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod breaks;
pub mod cli;
pub mod data;
pub mod error;
pub mod interpret;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod strategies;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
