//! Kernel conditional two-sample tests.
//!
//! Two data sets of transition pairs are compared covariate by covariate:
//! KRR estimates of the conditional mean embeddings are differenced in the
//! output RKHS and checked against confidence bands `β·σ(x)`, where `β`
//! comes from an analytical bound or a bootstrap.

pub mod calibration;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod points;
pub mod regression;
pub mod rng;
pub mod statistic;
pub mod testing;
pub mod thresholds;

pub use error::{Error, Result};
pub use kernels::{cross_gram, gram, GramMatrix, KernelSpec};
pub use points::Points;
pub use regression::{fit, DataSet, FittedModel};
