use serde::{Deserialize, Serialize};

use crate::aces::AcesVerdict;
use crate::error::{Error, Result};
use crate::smoothing::{PredictVerdict, SmoothedVerdict};

/// A verdict carrying a decided class and a certified radius.
pub trait CertifiedOutcome {
    fn decided_class(&self) -> Option<usize>;
    fn certified_radius(&self) -> f64;
}

impl CertifiedOutcome for AcesVerdict {
    fn decided_class(&self) -> Option<usize> {
        self.class()
    }

    fn certified_radius(&self) -> f64 {
        self.radius
    }
}

impl CertifiedOutcome for SmoothedVerdict {
    fn decided_class(&self) -> Option<usize> {
        self.class()
    }

    fn certified_radius(&self) -> f64 {
        self.radius()
    }
}

/// Ascending, non-negative radii at which accuracies are reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RadiusGrid(Vec<f64>);

impl RadiusGrid {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::invalid("radius grid is empty"));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("radii must be finite and non-negative"));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("radii must be strictly ascending"));
        }
        Ok(RadiusGrid(radii))
    }

    /// `0, 0.25, ..., 1.5`.
    pub fn standard() -> Self {
        RadiusGrid((0..=6).map(|i| i as f64 * 0.25).collect())
    }

    pub fn radii(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for RadiusGrid {
    fn default() -> Self {
        RadiusGrid::standard()
    }
}

impl TryFrom<Vec<f64>> for RadiusGrid {
    type Error = Error;

    fn try_from(radii: Vec<f64>) -> Result<Self> {
        RadiusGrid::new(radii)
    }
}

impl From<RadiusGrid> for Vec<f64> {
    fn from(grid: RadiusGrid) -> Self {
        grid.0
    }
}

fn check_inputs(len: usize, labels: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::invalid("no verdicts to evaluate"));
    }
    if len != labels {
        return Err(Error::invalid(format!("{len} verdicts but {labels} labels")));
    }
    Ok(())
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

/// Mean of `R_i · 1[class_i = label_i]`.
pub fn average_certified_radius<V: CertifiedOutcome>(verdicts: &[V], labels: &[usize]) -> Result<f64> {
    check_inputs(verdicts.len(), labels.len())?;
    let total: f64 = verdicts
        .iter()
        .zip(labels)
        .filter(|(v, &y)| v.decided_class() == Some(y))
        .map(|(v, _)| v.certified_radius())
        .sum();
    Ok(total / verdicts.len() as f64)
}

/// Fraction of samples classified correctly with radius `>= r`, per `r`.
pub fn certified_accuracy_at<V: CertifiedOutcome>(
    verdicts: &[V],
    labels: &[usize],
    grid: &RadiusGrid,
) -> Result<Vec<f64>> {
    check_inputs(verdicts.len(), labels.len())?;
    Ok(grid
        .radii()
        .iter()
        .map(|&r| {
            let hits = verdicts
                .iter()
                .zip(labels)
                .filter(|(v, &y)| v.decided_class() == Some(y) && v.certified_radius() >= r)
                .count();
            fraction(hits, verdicts.len())
        })
        .collect())
}

/// Fraction of samples whose routing to the certification network is
/// certified with a selection radius `>= r`, per `r`.
pub fn certified_selection_rate_at(verdicts: &[AcesVerdict], grid: &RadiusGrid) -> Result<Vec<f64>> {
    check_inputs(verdicts.len(), verdicts.len())?;
    Ok(grid
        .radii()
        .iter()
        .map(|&r| {
            let hits = verdicts
                .iter()
                .filter(|v| v.selection_radius.is_some_and(|s| s >= r))
                .count();
            fraction(hits, verdicts.len())
        })
        .collect())
}

/// Fraction of predictions equal to the label; abstentions count as wrong.
pub fn natural_accuracy(verdicts: &[PredictVerdict], labels: &[usize]) -> Result<f64> {
    check_inputs(verdicts.len(), labels.len())?;
    let hits = verdicts
        .iter()
        .zip(labels)
        .filter(|(v, &y)| v.class() == Some(y))
        .count();
    Ok(fraction(hits, verdicts.len()))
}
