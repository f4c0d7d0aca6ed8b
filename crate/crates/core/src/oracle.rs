//! Base classifiers and Monte Carlo sampling under Gaussian noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterRng, Phase, StreamKey};
use crate::stats::{normalized_entropy, phi, softmax, Probability};

/// Isotropic Gaussian noise `N(0, sigma^2 I)` in input units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    sigma: f64,
}

impl NoiseConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(NoiseConfig { sigma })
        } else {
            Err(Error::invalid(format!("noise sigma must be positive, got {sigma}")))
        }
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Outcome of one noisy forward pass of the certification network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawRecord {
    pub cert_class: usize,
    /// Base-`m` normalized entropy of the softmax output, in `[0, 1]`.
    pub entropy: f64,
}

/// The per-draw records of one sample: `phase0` picks the candidate class,
/// `phase1` feeds the confidence bounds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleDraws {
    pub phase0: Vec<DrawRecord>,
    pub phase1: Vec<DrawRecord>,
}

impl SampleDraws {
    pub fn check_lengths(&self, n0: u64, n: u64) -> Result<()> {
        if self.phase0.len() as u64 != n0 || self.phase1.len() as u64 != n {
            return Err(Error::invalid(format!(
                "draw lengths ({}, {}) do not match configuration ({n0}, {n})",
                self.phase0.len(),
                self.phase1.len()
            )));
        }
        Ok(())
    }
}

/// Per-class vote tallies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassCounts(Vec<u64>);

impl ClassCounts {
    pub fn zeros(num_classes: usize) -> Self {
        ClassCounts(vec![0; num_classes])
    }

    pub fn from_draws(draws: &[DrawRecord], num_classes: usize) -> Result<Self> {
        let mut counts = Self::zeros(num_classes);
        for d in draws {
            counts.record(d.cert_class)?;
        }
        Ok(counts)
    }

    pub fn record(&mut self, class: usize) -> Result<()> {
        let slot = self
            .0
            .get_mut(class)
            .ok_or_else(|| Error::invalid(format!("class {class} out of range")))?;
        *slot += 1;
        Ok(())
    }

    pub fn get(&self, class: usize) -> u64 {
        self.0.get(class).copied().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Most frequent class; the lowest index wins ties.
    pub fn top(&self) -> usize {
        let mut best = 0;
        for (c, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = c;
            }
        }
        best
    }

    /// The two most frequent classes `(c_A, c_B)`, lowest index first on ties.
    pub fn top_two(&self) -> (usize, usize) {
        let a = self.top();
        let mut b = if a == 0 { 1 } else { 0 };
        for (c, &v) in self.0.iter().enumerate() {
            if c != a && v > self.0[b] {
                b = c;
            }
        }
        (a, b)
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A deterministic base classifier `F` with logits `f`.
pub trait ClassifierOracle: Send + Sync {
    fn num_classes(&self) -> usize;

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Class and logits from a single evaluation.
    fn forward(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let logits = self.logits(x)?;
        Ok((argmax(&logits), logits))
    }
}

/// Binary linear classifier with closed-form smoothed behaviour.
///
/// `classify(x) = 1` iff `w.x + b >= 0`; logits are `(-s/τ, s/τ)` with
/// `s = w.x + b`, so the softmax entropy falls monotonically with the
/// distance from the hyperplane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSyntheticClassifier {
    weight: Vec<f64>,
    bias: f64,
    temperature: f64,
}

impl LinearSyntheticClassifier {
    pub fn new(weight: Vec<f64>, bias: f64, temperature: f64) -> Result<Self> {
        if weight.is_empty() {
            return Err(Error::invalid("weight vector is empty"));
        }
        if weight.iter().chain([&bias]).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite weight or bias"));
        }
        if weight.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid("weight vector is zero"));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(LinearSyntheticClassifier {
            weight,
            bias,
            temperature,
        })
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    pub fn weight_norm(&self) -> f64 {
        self.weight.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// `w.x + b`.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weight.len() {
            return Err(Error::invalid(format!(
                "point has dimension {}, classifier expects {}",
                x.len(),
                self.weight.len()
            )));
        }
        Ok(self.weight.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    /// Signed distance of `x` to the decision hyperplane.
    pub fn signed_distance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.margin(x)? / self.weight_norm())
    }

    /// Logits at margin `s`.
    pub fn logits_at_margin(&self, s: f64) -> Vec<f64> {
        vec![-s / self.temperature, s / self.temperature]
    }
}

impl ClassifierOracle for LinearSyntheticClassifier {
    fn num_classes(&self) -> usize {
        2
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.logits_at_margin(self.margin(x)?))
    }

    fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(usize::from(self.margin(x)? >= 0.0))
    }

    fn forward(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let s = self.margin(x)?;
        Ok((usize::from(s >= 0.0), self.logits_at_margin(s)))
    }
}

/// Exact smoothed probability of class 1: `Φ((w.x + b) / (σ ‖w‖))`.
pub fn true_smoothed_prob(clf: &LinearSyntheticClassifier, x: &[f64], noise: NoiseConfig) -> Result<Probability> {
    let d = clf.signed_distance(x)?;
    Ok(Probability::saturating(phi(d / noise.sigma())))
}

/// Largest ℓ2 radius on which the exact smoothed classifier is constant:
/// the distance to the hyperplane.
pub fn true_max_radius(clf: &LinearSyntheticClassifier, x: &[f64]) -> Result<f64> {
    let d = clf.signed_distance(x)?;
    if d == 0.0 {
        return Err(Error::domain("point lies on the decision boundary"));
    }
    Ok(d.abs())
}

/// Always predicts the same class.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantClassifier {
    class: usize,
    num_classes: usize,
    logit: f64,
}

impl ConstantClassifier {
    /// `logit` is the score of `class`; every other class scores 0.
    pub fn new(class: usize, num_classes: usize, logit: f64) -> Result<Self> {
        if num_classes < 2 || class >= num_classes {
            return Err(Error::invalid(format!(
                "class {class} invalid for {num_classes} classes"
            )));
        }
        if !(logit.is_finite() && logit > 0.0) {
            return Err(Error::invalid("constant classifier logit must be positive"));
        }
        Ok(ConstantClassifier {
            class,
            num_classes,
            logit,
        })
    }
}

impl ClassifierOracle for ConstantClassifier {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn logits(&self, _x: &[f64]) -> Result<Vec<f64>> {
        let mut l = vec![0.0; self.num_classes];
        l[self.class] = self.logit;
        Ok(l)
    }
}

/// Multiclass composition of linear heads, `logit_i = (w_i.x + b_i) / τ`.
/// No closed-form smoothed behaviour is claimed.
#[derive(Clone, Debug, PartialEq)]
pub struct OneVsRestClassifier {
    heads: Vec<(Vec<f64>, f64)>,
    temperature: f64,
}

impl OneVsRestClassifier {
    pub fn new(heads: Vec<(Vec<f64>, f64)>, temperature: f64) -> Result<Self> {
        if heads.len() < 2 {
            return Err(Error::invalid("one-vs-rest needs at least two heads"));
        }
        let dim = heads[0].0.len();
        if dim == 0 || heads.iter().any(|(w, _)| w.len() != dim) {
            return Err(Error::invalid("heads must share a non-zero dimension"));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        Ok(OneVsRestClassifier { heads, temperature })
    }
}

impl ClassifierOracle for OneVsRestClassifier {
    fn num_classes(&self) -> usize {
        self.heads.len()
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.heads[0].0.len() {
            return Err(Error::invalid("point dimension mismatch"));
        }
        Ok(self
            .heads
            .iter()
            .map(|(w, b)| (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b) / self.temperature)
            .collect())
    }
}

/// Class tallies plus the per-draw records they were built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub counts: ClassCounts,
    pub draws: Vec<DrawRecord>,
}

impl Sampled {
    pub fn from_draws(draws: Vec<DrawRecord>, num_classes: usize) -> Result<Self> {
        let counts = ClassCounts::from_draws(&draws, num_classes)?;
        Ok(Sampled { counts, draws })
    }
}

/// Evaluates `oracle` at `x + ε_i` for `n` noise draws keyed by `key`.
pub fn sample_with_noise(
    oracle: &dyn ClassifierOracle,
    x: &[f64],
    n: u64,
    noise: NoiseConfig,
    key: StreamKey,
) -> Result<Sampled> {
    if n == 0 {
        return Err(Error::invalid("sample_with_noise needs n >= 1"));
    }
    let rng = CounterRng::new(key);
    let dim = x.len() as u64;
    let m = oracle.num_classes();
    let mut counts = ClassCounts::zeros(m);
    let mut draws = Vec::with_capacity(n as usize);
    let mut perturbed = vec![0.0; x.len()];
    for i in 0..n {
        for (j, (p, &v)) in perturbed.iter_mut().zip(x).enumerate() {
            *p = v + noise.sigma() * rng.gaussian_at(i * dim + j as u64);
        }
        let (class, logits) = oracle.forward(&perturbed)?;
        if logits.len() != m {
            return Err(Error::invalid(format!(
                "oracle returned {} logits for {m} classes",
                logits.len()
            )));
        }
        counts.record(class)?;
        let entropy = normalized_entropy(&softmax(&logits)?);
        draws.push(DrawRecord {
            cert_class: class,
            entropy,
        });
    }
    Ok(Sampled { counts, draws })
}

/// A source of noisy draws for one fixed input.
pub trait NoisySampler: Sync {
    fn num_classes(&self) -> usize;

    fn sample(&self, phase: Phase, n: u64) -> Result<Sampled>;
}

/// An oracle evaluated around one input point, with the stream identity of
/// that point baked in.
#[derive(Clone, Copy)]
pub struct OraclePoint<'a> {
    pub oracle: &'a dyn ClassifierOracle,
    pub point: &'a [f64],
    pub noise: NoiseConfig,
    pub base_seed: u64,
    pub sample_index: u64,
    pub oracle_stream: u64,
}

impl<'a> OraclePoint<'a> {
    pub fn new(
        oracle: &'a dyn ClassifierOracle,
        point: &'a [f64],
        noise: NoiseConfig,
        base_seed: u64,
        sample_index: u64,
    ) -> Self {
        OraclePoint {
            oracle,
            point,
            noise,
            base_seed,
            sample_index,
            oracle_stream: 0,
        }
    }

    pub fn with_oracle_stream(self, oracle_stream: u64) -> Self {
        OraclePoint { oracle_stream, ..self }
    }
}

impl NoisySampler for OraclePoint<'_> {
    fn num_classes(&self) -> usize {
        self.oracle.num_classes()
    }

    fn sample(&self, phase: Phase, n: u64) -> Result<Sampled> {
        let key = StreamKey::new(self.base_seed, self.sample_index, phase).with_oracle_stream(self.oracle_stream);
        sample_with_noise(self.oracle, self.point, n, self.noise, key)
    }
}

/// Draws both certification phases from a sampler.
pub fn collect_draws(sampler: &dyn NoisySampler, n0: u64, n: u64) -> Result<SampleDraws> {
    Ok(SampleDraws {
        phase0: sampler.sample(Phase::Selection, n0)?.draws,
        phase1: sampler.sample(Phase::Estimation, n)?.draws,
    })
}
