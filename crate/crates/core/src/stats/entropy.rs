use super::ProbDist;
use crate::error::{Error, Result};

/// Probabilities below this are treated as exact zeros in the entropy sum.
const NEGLIGIBLE: f64 = 1e-300;

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Result<ProbDist> {
    if logits.len() < 2 {
        return Err(Error::invalid("softmax needs at least two logits"));
    }
    if let Some(bad) = logits.iter().find(|l| !l.is_finite()) {
        return Err(Error::invalid(format!("non-finite logit {bad}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ProbDist(exps.into_iter().map(|e| e / total).collect()))
}

/// Shannon entropy in base `m`, so the result lies in `[0, 1]`.
pub fn normalized_entropy(dist: &ProbDist) -> f64 {
    let m = dist.num_classes() as f64;
    let h: f64 = dist
        .probs()
        .iter()
        .filter(|&&p| p >= NEGLIGIBLE)
        .map(|&p| -p * p.ln())
        .sum();
    (h / m.ln()).clamp(0.0, 1.0)
}
