//! Replays recorded draws in place of a live classifier.
//!
//! A recorded dataset fixes the draws of both certification phases, so
//! replay can only answer requests of exactly the recorded sizes. Prediction
//! requests are served from the estimation draws.

use crate::error::{Error, Result};
use crate::oracle::{NoisySampler, Sampled};
use crate::rng::Phase;
use crate::store::{Dataset, SampleRecord};

#[derive(Clone, Copy, Debug)]
pub struct ReplayClassifier<'a> {
    dataset: &'a Dataset,
}

impl<'a> ReplayClassifier<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        ReplayClassifier { dataset }
    }

    pub fn len(&self) -> usize {
        self.dataset.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.samples.is_empty()
    }

    pub fn at(&self, index: usize) -> Result<ReplayPoint<'a>> {
        let record = self
            .dataset
            .samples
            .get(index)
            .ok_or_else(|| Error::invalid(format!("no recorded sample {index}")))?;
        Ok(ReplayPoint {
            record,
            num_classes: self.dataset.manifest.num_classes,
        })
    }
}

/// The recorded draws of one sample.
#[derive(Clone, Copy, Debug)]
pub struct ReplayPoint<'a> {
    record: &'a SampleRecord,
    num_classes: usize,
}

impl NoisySampler for ReplayPoint<'_> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn sample(&self, phase: Phase, n: u64) -> Result<Sampled> {
        let draws = match phase {
            Phase::Selection => &self.record.draws.phase0,
            Phase::Estimation | Phase::Prediction => &self.record.draws.phase1,
        };
        if draws.len() as u64 != n {
            return Err(Error::invalid(format!(
                "sample {} has {} recorded draws for {phase:?}, {n} requested",
                self.record.header.sample_id,
                draws.len()
            )));
        }
        Sampled::from_draws(draws.clone(), self.num_classes)
    }
}
