//! Randomized smoothing for a single base classifier: the certified radius
//! and the certify/predict procedures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{collect_draws, ClassCounts, NoiseConfig, NoisySampler, SampleDraws};
use crate::rng::Phase;
use crate::stats::{binom_p_value, clopper_pearson_lower, phi_inv, Confidence, Probability};

/// Sampling budget and confidence for one certification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationConfig {
    /// Draws used to pick the candidate class.
    pub n0: u64,
    /// Draws used to bound its probability.
    pub n: u64,
    /// Overall error budget.
    pub alpha: f64,
    pub noise: NoiseConfig,
    pub base_seed: u64,
}

impl CertificationConfig {
    pub fn new(n0: u64, n: u64, alpha: f64, noise: NoiseConfig, base_seed: u64) -> Result<Self> {
        let cfg = CertificationConfig {
            n0,
            n,
            alpha,
            noise,
            base_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n == 0 {
            return Err(Error::invalid("n0 and n must both be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        NoiseConfig::new(self.noise.sigma())?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SmoothedVerdict {
    Certified { class: usize, radius: f64 },
    Abstain,
}

impl SmoothedVerdict {
    pub fn class(&self) -> Option<usize> {
        match *self {
            SmoothedVerdict::Certified { class, .. } => Some(class),
            SmoothedVerdict::Abstain => None,
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            SmoothedVerdict::Certified { radius, .. } => radius,
            SmoothedVerdict::Abstain => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictVerdict {
    Predicted(usize),
    Abstain,
}

impl PredictVerdict {
    pub fn class(&self) -> Option<usize> {
        match *self {
            PredictVerdict::Predicted(c) => Some(c),
            PredictVerdict::Abstain => None,
        }
    }
}

/// `σ Φ⁻¹(p)` for a lower bound `1/2 < p < 1`.
pub fn certified_radius(p_lower: Probability, noise: NoiseConfig) -> Result<f64> {
    let p = p_lower.get();
    if p <= 0.5 {
        return Err(Error::domain(format!("no certificate for p_lower = {p} <= 1/2")));
    }
    if p >= 1.0 {
        return Err(Error::domain("p_lower = 1 gives an unbounded radius"));
    }
    Ok(noise.sigma() * phi_inv(p))
}

/// `σ/2 (Φ⁻¹(p_A) − Φ⁻¹(p_B))` for `p_A >= p_B`.
pub fn certified_radius_two_sided(pa_lower: Probability, pb_upper: Probability, noise: NoiseConfig) -> Result<f64> {
    let (pa, pb) = (pa_lower.get(), pb_upper.get());
    if !(pa > 0.0 && pa < 1.0 && pb > 0.0 && pb < 1.0) {
        return Err(Error::domain("both bounds must lie strictly inside (0, 1)"));
    }
    if pa < pb {
        return Err(Error::domain(format!("p_A = {pa} is below p_B = {pb}")));
    }
    Ok(noise.sigma() / 2.0 * (phi_inv(pa) - phi_inv(pb)))
}

/// A certification outcome together with the statistics that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RsCertification {
    pub verdict: SmoothedVerdict,
    /// Candidate class chosen from the selection-phase draws.
    pub top_class: usize,
    /// Clopper-Pearson lower bound on the candidate's probability.
    pub p_lower: f64,
}

/// Certify from a candidate class and its estimation-phase count.
pub fn rs_certify_counts(
    top_class: usize,
    top_count: u64,
    n: u64,
    alpha: f64,
    noise: NoiseConfig,
) -> Result<RsCertification> {
    let p_lower = clopper_pearson_lower(top_count, n, Confidence::from_alpha(alpha)?)?;
    let verdict = if p_lower.get() > 0.5 {
        SmoothedVerdict::Certified {
            class: top_class,
            radius: certified_radius(p_lower, noise)?,
        }
    } else {
        SmoothedVerdict::Abstain
    };
    Ok(RsCertification {
        verdict,
        top_class,
        p_lower: p_lower.get(),
    })
}

/// Certify from already-collected draws of both phases.
pub fn rs_certify_draws(draws: &SampleDraws, num_classes: usize, cfg: &CertificationConfig) -> Result<RsCertification> {
    cfg.validate()?;
    draws.check_lengths(cfg.n0, cfg.n)?;
    let top_class = ClassCounts::from_draws(&draws.phase0, num_classes)?.top();
    let top_count = draws.phase1.iter().filter(|d| d.cert_class == top_class).count() as u64;
    if draws.phase1.iter().any(|d| d.cert_class >= num_classes) {
        return Err(Error::invalid("draw class out of range"));
    }
    rs_certify_counts(top_class, top_count, cfg.n, cfg.alpha, cfg.noise)
}

/// Monte Carlo certification: `n0` draws pick the class, `n` fresh draws
/// bound its probability at confidence `1 - alpha`.
pub fn rs_certify(sampler: &dyn NoisySampler, cfg: &CertificationConfig) -> Result<RsCertification> {
    cfg.validate()?;
    let draws = collect_draws(sampler, cfg.n0, cfg.n)?;
    rs_certify_draws(&draws, sampler.num_classes(), cfg)
}

/// Prediction test on a fixed tally: binomial test of the top class against
/// the runner-up.
pub fn rs_predict_counts(counts: &ClassCounts, alpha: f64) -> Result<PredictVerdict> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let (a, b) = counts.top_two();
    let (na, nb) = (counts.get(a), counts.get(b));
    if na + nb == 0 {
        return Ok(PredictVerdict::Abstain);
    }
    let rho = binom_p_value(na, na + nb, Probability::HALF)?;
    Ok(if rho.get() <= alpha {
        PredictVerdict::Predicted(a)
    } else {
        PredictVerdict::Abstain
    })
}

/// One round of `n` draws followed by [`rs_predict_counts`].
pub fn rs_predict(sampler: &dyn NoisySampler, n: u64, alpha: f64) -> Result<PredictVerdict> {
    if n < 2 {
        return Err(Error::invalid("prediction needs n >= 2"));
    }
    let sampled = sampler.sample(Phase::Prediction, n)?;
    rs_predict_counts(&sampled.counts, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ConstantClassifier, DrawRecord, LinearSyntheticClassifier, OraclePoint};
    use crate::stats::std_normal_cdf;

    const PHI_1: f64 = 0.841_344_746_068_542_9;

    fn noise(s: f64) -> NoiseConfig {
        NoiseConfig::new(s).unwrap()
    }

    fn prob(p: f64) -> Probability {
        Probability::new(p).unwrap()
    }

    #[test]
    fn radius_examples() {
        let r = certified_radius(prob(0.5 + 1e-12), noise(1.0)).unwrap();
        assert!(r > 0.0 && r < 1e-11);
        assert!((certified_radius(prob(PHI_1), noise(0.5)).unwrap() - 0.5).abs() < 1e-9);
        let p = prob(0.93);
        let r1 = certified_radius(p, noise(0.25)).unwrap();
        let r2 = certified_radius(p, noise(0.5)).unwrap();
        assert_eq!(2.0 * r1, r2);
    }

    #[test]
    fn radius_domain_errors() {
        assert!(matches!(certified_radius(prob(0.5), noise(1.0)), Err(Error::Domain(_))));
        assert!(matches!(certified_radius(prob(0.2), noise(1.0)), Err(Error::Domain(_))));
        assert!(matches!(certified_radius(prob(1.0), noise(1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn two_sided_radius() {
        let pa = std_normal_cdf(1.0).unwrap();
        let pb = std_normal_cdf(-1.0).unwrap();
        let r = certified_radius_two_sided(pa, pb, noise(1.0)).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        assert_eq!(
            certified_radius_two_sided(prob(0.7), prob(0.7), noise(2.0)).unwrap(),
            0.0
        );
        assert!(certified_radius_two_sided(prob(0.3), prob(0.4), noise(1.0)).is_err());
    }

    #[test]
    fn two_sided_reduces_exactly() {
        for p in [0.5000001, 0.6, 0.8413, 0.99, 0.9999999] {
            for s in [0.12, 0.25, 0.5, 1.0, 3.7] {
                let one = certified_radius(prob(p), noise(s)).unwrap();
                let two = certified_radius_two_sided(prob(p), prob(1.0 - p), noise(s)).unwrap();
                assert_eq!(one, two, "p = {p}, sigma = {s}");
            }
        }
    }

    #[test]
    fn constant_classifier_certifies_at_saturated_bound() {
        let clf = ConstantClassifier::new(2, 4, 3.0).unwrap();
        let x = [0.0];
        let cfg = CertificationConfig::new(100, 1000, 0.001, noise(0.5), 9).unwrap();
        let sampler = OraclePoint::new(&clf, &x, cfg.noise, cfg.base_seed, 0);
        let got = rs_certify(&sampler, &cfg).unwrap();
        let p = 0.001f64.powf(1.0 / 1000.0);
        let want = 0.5 * phi_inv(p);
        match got.verdict {
            SmoothedVerdict::Certified { class, radius } => {
                assert_eq!(class, 2);
                assert!((radius - want).abs() < 1e-12);
            }
            SmoothedVerdict::Abstain => panic!("expected certificate"),
        }
    }

    #[test]
    fn boundary_point_abstains() {
        let clf = LinearSyntheticClassifier::new(vec![1.0], 0.0, 1.0).unwrap();
        let cfg = CertificationConfig::new(100, 10_000, 0.001, noise(1.0), 1).unwrap();
        let x = [0.0];
        for i in 0..20 {
            let sampler = OraclePoint::new(&clf, &x, cfg.noise, cfg.base_seed, i);
            assert_eq!(rs_certify(&sampler, &cfg).unwrap().verdict, SmoothedVerdict::Abstain);
        }
    }

    #[test]
    fn predict_examples() {
        let c = |v: Vec<u64>| {
            let mut counts = ClassCounts::zeros(v.len());
            for (class, &k) in v.iter().enumerate() {
                for _ in 0..k {
                    counts.record(class).unwrap();
                }
            }
            counts
        };
        assert_eq!(
            rs_predict_counts(&c(vec![0, 1000, 0]), 0.001).unwrap(),
            PredictVerdict::Predicted(1)
        );
        assert_eq!(
            rs_predict_counts(&c(vec![400, 400, 3]), 0.4).unwrap(),
            PredictVerdict::Abstain
        );
        assert_eq!(
            rs_predict_counts(&c(vec![501, 499]), 0.001).unwrap(),
            PredictVerdict::Abstain
        );
    }

    #[test]
    fn smaller_alpha_never_creates_certificates() {
        let mk = |class| DrawRecord {
            cert_class: class,
            entropy: 0.5,
        };
        let mut draws = SampleDraws {
            phase0: vec![mk(1); 10],
            ..SampleDraws::default()
        };
        for top in [520u64, 560, 600, 700, 990] {
            draws.phase1 = (0..1000).map(|i| mk(usize::from(i < top))).collect();
            let mut prev_certified = true;
            for alpha in [0.2, 0.05, 0.01, 0.001, 1e-6] {
                let cfg = CertificationConfig::new(10, 1000, alpha, noise(1.0), 0).unwrap();
                let v = rs_certify_draws(&draws, 2, &cfg).unwrap().verdict;
                let certified = v != SmoothedVerdict::Abstain;
                assert!(prev_certified || !certified);
                prev_certified = certified;
            }
        }
    }

    #[test]
    fn draw_length_mismatch_rejected() {
        let cfg = CertificationConfig::new(2, 3, 0.01, noise(1.0), 0).unwrap();
        let draws = SampleDraws::default();
        assert!(rs_certify_draws(&draws, 2, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CertificationConfig::new(0, 10, 0.01, noise(1.0), 0).is_err());
        assert!(CertificationConfig::new(1, 10, 1.0, noise(1.0), 0).is_err());
        assert!(CertificationConfig::new(1, 10, 0.0, noise(1.0), 0).is_err());
    }
}
