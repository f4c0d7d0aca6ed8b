//! Statistical kernels shared by every certification routine.
//!
//! Everything here is pure and thread-safe.

mod binomial;
mod entropy;
mod normal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binomial::{binom_p_value, binom_pmf, clopper_pearson_lower};
pub use entropy::{normalized_entropy, softmax};
pub use normal::{std_normal_cdf, std_normal_quantile};

pub(crate) use normal::{phi, phi_inv};

/// A real number in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const HALF: Probability = Probability(0.5);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::invalid(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps a value that is a probability up to rounding.
    pub(crate) fn saturating(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub const fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A confidence level `1 - tail` with `0 < tail < 1`.
///
/// The tail mass is stored directly so that levels such as `1 - alpha/2`
/// with small `alpha` do not lose digits to cancellation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Confidence {
    tail: f64,
}

impl Confidence {
    pub fn new(level: f64) -> Result<Self> {
        if level > 0.0 && level < 1.0 {
            Ok(Confidence { tail: 1.0 - level })
        } else {
            Err(Error::invalid(format!("confidence level {level} outside (0, 1)")))
        }
    }

    /// Confidence `1 - alpha`, keeping `alpha` exact.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Confidence { tail: alpha })
        } else {
            Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")))
        }
    }

    pub fn level(self) -> f64 {
        1.0 - self.tail
    }

    /// The error mass `1 - level`.
    pub fn tail(self) -> f64 {
        self.tail
    }
}

/// A discrete distribution over `m >= 2` classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invalid("distribution needs at least two classes"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("distribution entry outside [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(ProbDist(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }
}
