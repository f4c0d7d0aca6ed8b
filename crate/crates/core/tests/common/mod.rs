//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use aces_core::oracle::{
    collect_draws, ClassifierOracle, LinearSyntheticClassifier, NoiseConfig, OneVsRestClassifier, OraclePoint,
};
use aces_core::rng::CounterRng;
use aces_core::store::{Dataset, DatasetManifest, SampleHeader, SampleRecord};
use rayon::prelude::*;

pub fn linear() -> LinearSyntheticClassifier {
    LinearSyntheticClassifier::new(vec![0.6, 0.8], 0.0, 1.0).unwrap()
}

pub fn three_class() -> OneVsRestClassifier {
    OneVsRestClassifier::new(
        vec![(vec![1.0, 0.0], 0.0), (vec![-0.5, 0.9], 0.1), (vec![-0.5, -0.9], -0.1)],
        0.5,
    )
    .unwrap()
}

/// Point `i` of a seeded Gaussian cloud.
pub fn point(seed: u64, i: u64, dim: usize, spread: f64) -> Vec<f64> {
    let rng = CounterRng::from_words(&[seed, i, 7]);
    (0..dim as u64).map(|j| spread * rng.gaussian_at(j)).collect()
}

/// Records `samples` points of `oracle` under noise. Labels are the clean
/// prediction with every fifth one shifted; core predictions are the label
/// except for every eleventh sample.
pub fn dataset(
    oracle: &dyn ClassifierOracle,
    dim: usize,
    samples: u64,
    n0: u64,
    n: u64,
    sigma: f64,
    seed: u64,
) -> Dataset {
    let m = oracle.num_classes();
    let noise = NoiseConfig::new(sigma).unwrap();
    let records = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = point(seed, i, dim, 1.5);
            let clean = oracle.classify(&x).unwrap();
            let label = if i % 5 == 4 { (clean + 1) % m } else { clean };
            let core_prediction = if i % 11 == 10 { (label + 1) % m } else { label };
            let sampler = OraclePoint::new(oracle, &x, noise, seed, i);
            SampleRecord {
                header: SampleHeader {
                    sample_id: i,
                    label,
                    core_prediction,
                },
                draws: collect_draws(&sampler, n0, n).unwrap(),
            }
        })
        .collect();
    Dataset {
        manifest: DatasetManifest {
            format_version: 1,
            num_classes: m,
            sigma,
            n0,
            n,
            base_seed: seed,
            num_samples: samples,
            source: "integration fixture".into(),
        },
        samples: records,
    }
}
