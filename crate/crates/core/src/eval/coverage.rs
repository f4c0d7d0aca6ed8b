//! Empirical soundness checks against fixtures with closed-form ground
//! truth.
//!
//! Every fixture is built on [`LinearSyntheticClassifier`], whose behavior
//! depends on an input only through its margin `s = w.x + b`. Under noise
//! `N(0, σ²I)` the margin is distributed as `N(s, (σ‖w‖)²)`, which makes the
//! smoothed quantities exact one-dimensional expressions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aces::{aces_certify, SelectionMechanism};
use crate::error::{Error, Result};
use crate::oracle::{collect_draws, LinearSyntheticClassifier, NoiseConfig, OraclePoint};
use crate::smoothing::{rs_certify, CertificationConfig, SmoothedVerdict};
use crate::stats::{normalized_entropy, phi, softmax};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverageFixture {
    /// Plain smoothing of the linear classifier.
    Smoothing {
        classifier: LinearSyntheticClassifier,
        points: Vec<Vec<f64>>,
    },
    /// ACES with the linear classifier as certification network, entropy
    /// selection at `theta`, and a constant core network.
    Aces {
        classifier: LinearSyntheticClassifier,
        core_class: usize,
        theta: f64,
        points: Vec<Vec<f64>>,
    },
}

impl CoverageFixture {
    fn classifier(&self) -> &LinearSyntheticClassifier {
        match self {
            CoverageFixture::Smoothing { classifier, .. } | CoverageFixture::Aces { classifier, .. } => classifier,
        }
    }

    fn points(&self) -> &[Vec<f64>] {
        match self {
            CoverageFixture::Smoothing { points, .. } | CoverageFixture::Aces { points, .. } => points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub fixture: CoverageFixture,
    pub certification: CertificationConfig,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub trials: u64,
    /// Trials whose verdict names the wrong class or overstates the radius.
    pub violations: u64,
    /// `violations / trials`.
    pub violation_fraction: f64,
    /// Trials that did not abstain.
    pub decided: u64,
    pub alpha: f64,
    pub config: CoverageConfig,
}

/// Exact behavior of the ACES fixture as a function of the margin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcesGroundTruth {
    /// Draws with `|s| >= s_theta` select the certification network.
    pub s_theta: f64,
    /// The smoothed selection picks the certification network iff
    /// `|s| > t_star`.
    pub t_star: f64,
    /// Standard deviation of the noisy margin.
    pub sigma_s: f64,
    pub weight_norm: f64,
    pub core_class: usize,
}

const BISECTION_STEPS: usize = 200;

impl AcesGroundTruth {
    pub fn new(clf: &LinearSyntheticClassifier, core_class: usize, theta: f64, noise: NoiseConfig) -> Result<Self> {
        if core_class >= 2 {
            return Err(Error::invalid("core class must be 0 or 1 for the linear fixture"));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid(format!("theta {theta} outside [0, 1]")));
        }
        let s_theta = entropy_boundary(clf, theta)?;
        let weight_norm = clf.weight_norm();
        let sigma_s = noise.sigma() * weight_norm;
        let mut truth = AcesGroundTruth {
            s_theta,
            t_star: 0.0,
            sigma_s,
            weight_norm,
            core_class,
        };
        if truth.selection_prob(0.0) < 0.5 {
            // selection_prob rises from below 1/2 at 0 to at least 1/2 at s_theta
            let (mut lo, mut hi) = (0.0, s_theta);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if truth.selection_prob(mid) < 0.5 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            truth.t_star = hi;
        }
        Ok(truth)
    }

    /// Probability that a noisy draw at margin `s` selects the certification
    /// network.
    pub fn selection_prob(&self, s: f64) -> f64 {
        phi((s - self.s_theta) / self.sigma_s) + phi((-self.s_theta - s) / self.sigma_s)
    }

    /// Output of the exact composed classifier at margin `s`.
    pub fn class_at_margin(&self, s: f64) -> Result<usize> {
        if self.t_star == 0.0 {
            if s == 0.0 {
                return Err(Error::domain("margin on the smoothed decision boundary"));
            }
            return Ok(usize::from(s > 0.0));
        }
        if s.abs() == self.t_star {
            return Err(Error::domain("margin on the smoothed selection boundary"));
        }
        if s.abs() > self.t_star {
            Ok(usize::from(s > 0.0))
        } else {
            Ok(self.core_class)
        }
    }

    /// Largest ℓ2 radius around margin `s` on which the exact composed
    /// classifier is constant.
    pub fn max_radius_at_margin(&self, s: f64) -> Result<f64> {
        self.class_at_margin(s)?;
        let boundaries: &[f64] = if self.t_star == 0.0 {
            &[0.0]
        } else if self.core_class == 0 {
            // core agrees with the negative side, only +t_star changes output
            &[self.t_star]
        } else {
            &[-self.t_star]
        };
        let distance = boundaries.iter().map(|b| (s - b).abs()).fold(f64::INFINITY, f64::min);
        Ok(distance / self.weight_norm)
    }
}

fn entropy_at(clf: &LinearSyntheticClassifier, s: f64) -> Result<f64> {
    Ok(normalized_entropy(&softmax(&clf.logits_at_margin(s))?))
}

/// Smallest margin magnitude whose entropy is at most `theta`.
fn entropy_boundary(clf: &LinearSyntheticClassifier, theta: f64) -> Result<f64> {
    if entropy_at(clf, 0.0)? <= theta {
        return Ok(0.0);
    }
    let mut hi = clf.temperature();
    while entropy_at(clf, hi)? > theta {
        hi *= 2.0;
        if hi > 1e4 * clf.temperature() {
            return Err(Error::invalid(format!("entropy never drops to theta = {theta}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if entropy_at(clf, mid)? > theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

struct Truth {
    class: usize,
    radius: f64,
}

fn point_truths(config: &CoverageConfig) -> Result<Vec<Truth>> {
    let clf = config.fixture.classifier();
    let noise = config.certification.noise;
    match &config.fixture {
        CoverageFixture::Smoothing { points, .. } => points
            .iter()
            .map(|x| {
                let d = clf.signed_distance(x)?;
                if d == 0.0 {
                    return Err(Error::domain("fixture point on the decision boundary"));
                }
                Ok(Truth {
                    class: usize::from(d > 0.0),
                    radius: d.abs(),
                })
            })
            .collect(),
        CoverageFixture::Aces {
            core_class,
            theta,
            points,
            ..
        } => {
            let truth = AcesGroundTruth::new(clf, *core_class, *theta, noise)?;
            points
                .iter()
                .map(|x| {
                    let s = clf.margin(x)?;
                    Ok(Truth {
                        class: truth.class_at_margin(s)?,
                        radius: truth.max_radius_at_margin(s)?,
                    })
                })
                .collect()
        }
    }
}

/// Runs `trials` certifications, trial `t` at point `t mod |points|` with
/// noise stream `t`, and counts verdicts contradicting the ground truth.
pub fn run_coverage_experiment(config: &CoverageConfig) -> Result<CoverageReport> {
    if config.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    config.certification.validate()?;
    let clf = config.fixture.classifier();
    let clf = LinearSyntheticClassifier::new(clf.weight().to_vec(), clf.bias(), clf.temperature())?;
    let points = config.fixture.points();
    if points.is_empty() {
        return Err(Error::invalid("fixture has no points"));
    }
    let truths = point_truths(config)?;
    let cfg = &config.certification;

    let outcomes: Vec<(bool, bool)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let i = (t % points.len() as u64) as usize;
            let sampler = OraclePoint::new(&clf, &points[i], cfg.noise, cfg.base_seed, t);
            let (class, radius) = match &config.fixture {
                CoverageFixture::Smoothing { .. } => match rs_certify(&sampler, cfg)?.verdict {
                    SmoothedVerdict::Certified { class, radius } => (Some(class), radius),
                    SmoothedVerdict::Abstain => (None, 0.0),
                },
                CoverageFixture::Aces { core_class, theta, .. } => {
                    let draws = collect_draws(&sampler, cfg.n0, cfg.n)?;
                    let v = aces_certify(
                        &draws,
                        2,
                        *core_class,
                        cfg,
                        SelectionMechanism::EntropyThreshold(*theta),
                    )?;
                    (v.class(), v.radius)
                }
            };
            Ok(match class {
                None => (false, false),
                Some(c) => (true, c != truths[i].class || radius > truths[i].radius),
            })
        })
        .collect::<Result<_>>()?;

    let decided = outcomes.iter().filter(|o| o.0).count() as u64;
    let violations = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(CoverageReport {
        trials: config.trials,
        violations,
        violation_fraction: violations as f64 / config.trials as f64,
        decided,
        alpha: cfg.alpha,
        config: config.clone(),
    })
}
