// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod devices;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod feeder;
pub mod metrics;
pub mod oracle;
pub mod problem;
pub mod record;
pub mod signals;

pub use error::{Error, Result};
