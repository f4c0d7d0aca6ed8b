//! Counter-based noise generation.
//!
//! Every Gaussian coordinate is a pure function of
//! `(base_seed, sample_index, stream, phase, draw_index, coordinate)`, so
//! samples can be processed in any order on any number of threads and still
//! reproduce bit for bit.

use crate::stats::phi_inv;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a bijective avalanche mix of one word.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN) ^ mix64(word.wrapping_add(GOLDEN)))
}

/// Which sampling round a draw belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// `n0` draws used to pick the candidate class.
    Selection,
    /// `n` fresh draws used for the confidence bound.
    Estimation,
    /// Single round used by the prediction algorithms.
    Prediction,
}

impl Phase {
    fn tag(self) -> u64 {
        match self {
            Phase::Selection => 0,
            Phase::Estimation => 1,
            Phase::Prediction => 2,
        }
    }
}

/// Identifies one independent noise stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub base_seed: u64,
    pub sample_index: u64,
    /// Distinguishes oracles sampled at the same point (e.g. a separate
    /// selection network).
    pub oracle_stream: u64,
    pub phase: Phase,
}

impl StreamKey {
    pub fn new(base_seed: u64, sample_index: u64, phase: Phase) -> Self {
        StreamKey {
            base_seed,
            sample_index,
            oracle_stream: 0,
            phase,
        }
    }

    pub fn with_oracle_stream(self, oracle_stream: u64) -> Self {
        StreamKey { oracle_stream, ..self }
    }

    fn digest(&self) -> u64 {
        let s = absorb(mix64(self.base_seed), self.sample_index);
        let s = absorb(s, self.oracle_stream);
        absorb(s, self.phase.tag())
    }
}

/// Stateless generator for one stream.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(key: StreamKey) -> Self {
        CounterRng { key: key.digest() }
    }

    /// Generator keyed by an arbitrary word sequence, for auxiliary draws
    /// such as synthetic data layout.
    pub fn from_words(words: &[u64]) -> Self {
        let key = words.iter().fold(mix64(0), |s, &w| absorb(s, w));
        CounterRng { key }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        // SplitMix64 output for position `counter` of the keyed stream
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform variate strictly inside (0, 1) with 53 bits of resolution.
    #[inline]
    pub fn uniform_at(&self, counter: u64) -> f64 {
        ((self.u64_at(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate via the inverse CDF.
    #[inline]
    pub fn gaussian_at(&self, counter: u64) -> f64 {
        phi_inv(self.uniform_at(counter))
    }
}
