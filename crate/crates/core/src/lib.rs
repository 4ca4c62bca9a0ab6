//! Mergeable LSH count sketches for training linear models on compressed
//! data streams.
//!
//! A dataset is compressed into an `R x B` array of integer counters. Each of
//! the `R` rows is indexed by an independently seeded signed-random-projection
//! hash, and querying the array with a model's parameter vector returns an
//! unbiased estimate of a surrogate loss whose minimizer is the least-squares
//! solution (regression) or a calibrated max-margin separator
//! (classification). Models are then fitted by derivative-free descent
//! against the sketch alone.
//!
//! Sketches built with the same seed merge by counter addition, so devices
//! can sketch their own shards and combine the results exactly.
//!
//! ```
//! use storm::harness::{build_sketch, gen_synthetic_regression, normalize};
//! use storm::optimizer::{dfo_train, OptimizerConfig};
//!
//! let raw = gen_synthetic_regression(500, 1, &[0.7], 0.0, 1).unwrap();
//! let data = normalize(&raw, 0.99).unwrap();
//! let sketch = build_sketch(&data, 4, 100, 42).unwrap();
//! let trace = dfo_train(&sketch, &OptimizerConfig { eta: 1.0, ..Default::default() }).unwrap();
//! assert_eq!(trace.theta.len(), 1);
//! ```

pub mod baselines;
pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lsh;
pub mod optimizer;
pub mod sketch;
pub mod surrogate;

pub use error::{Error, ParseError, Result};
pub use lsh::{HashConfig, HashFamily};
pub use sketch::{LossEstimate, Sketch};
