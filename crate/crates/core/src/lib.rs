//! Certification engine for randomized smoothing and ACES compositional
//! classifiers.
//!
//! The crate is organised bottom-up:
//!
//! * [`stats`]: normal CDF/quantile, binomial tails, Clopper-Pearson bounds,
//!   softmax and normalized entropy.
//! * [`rng`]: counter-based noise streams.
//! * [`oracle`]: base classifiers and noisy sampling; [`replay`] serves
//!   recorded draws.
//! * [`smoothing`]: certify/predict for a single smoothed classifier.
//! * [`aces`]: selection + certification + core composition, and the
//!   threshold sweep.
//! * [`store`]: the on-disk dataset format.
//! * [`eval`]: metrics, sweep tables and coverage experiments.
//! * [`cli`]: the commands behind the `aces` binary.

pub mod aces;
pub mod cli;
pub mod error;
pub mod eval;
pub mod oracle;
pub mod replay;
pub mod rng;
pub mod smoothing;
pub mod stats;
pub mod store;

pub use error::{Error, Result};
