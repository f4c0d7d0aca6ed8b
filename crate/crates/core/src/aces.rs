//! The ACES composition: a smoothed selection mechanism routes each input
//! either to a smoothed certification network or to an unsmoothed core
//! network.
//!
//! Certification follows the four-branch procedure: certified selection of
//! the certification network (positive radius), certified selection of the
//! core network, agreement between the two networks, or abstention. Both
//! confidence bounds run at `1 - alpha/2` so the joint statement holds at
//! `1 - alpha`.
//!
//! With the entropy mechanism the selection decision of every draw is a
//! threshold on a stored entropy, so a whole grid of thresholds can be
//! evaluated from one set of draws ([`sweep_thresholds`]).

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::{ClassCounts, DrawRecord, NoisySampler, SampleDraws};
use crate::rng::Phase;
use crate::smoothing::{certified_radius, CertificationConfig, PredictVerdict};
use crate::stats::{binom_p_value, clopper_pearson_lower, Confidence, Probability};

/// Output of the selection mechanism for one input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Route {
    /// Selection bit 0.
    Core,
    /// Selection bit 1.
    Certification,
}

/// Selects the certification network iff `entropy <= theta`.
#[inline]
pub fn entropy_select(entropy: f64, theta: f64) -> Route {
    if entropy <= theta {
        Route::Certification
    } else {
        Route::Core
    }
}

/// Draw tallies of the selection mechanism.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelectionCounts {
    pub core: u64,
    pub certification: u64,
}

impl SelectionCounts {
    pub fn get(&self, route: Route) -> u64 {
        match route {
            Route::Core => self.core,
            Route::Certification => self.certification,
        }
    }

    pub fn total(&self) -> u64 {
        self.core + self.certification
    }

    fn from_selected(selected: u64, total: u64) -> Self {
        SelectionCounts {
            core: total - selected,
            certification: selected,
        }
    }

    fn from_binary(counts: &ClassCounts) -> Result<Self> {
        if counts.as_slice().len() != 2 {
            return Err(Error::invalid("selection oracle must be binary"));
        }
        Ok(SelectionCounts {
            core: counts.get(0),
            certification: counts.get(1),
        })
    }
}

pub fn selection_counts_from_draws(draws: &[DrawRecord], theta: f64) -> SelectionCounts {
    let selected = draws
        .iter()
        .filter(|d| entropy_select(d.entropy, theta) == Route::Certification)
        .count() as u64;
    SelectionCounts::from_selected(selected, draws.len() as u64)
}

/// How the selection decision of a draw is obtained.
#[derive(Clone, Copy)]
pub enum SelectionMechanism<'a> {
    /// Threshold on the certification network's normalized entropy, reusing
    /// its draws.
    EntropyThreshold(f64),
    /// A separate binary classifier (class 1 = certification network) with
    /// its own noise streams.
    BinaryOracle(&'a dyn NoisySampler),
}

impl SelectionMechanism<'_> {
    fn validate(&self) -> Result<()> {
        match *self {
            SelectionMechanism::EntropyThreshold(theta) if !(0.0..=1.0).contains(&theta) => {
                Err(Error::invalid(format!("theta {theta} outside [0, 1]")))
            }
            SelectionMechanism::BinaryOracle(s) if s.num_classes() != 2 => {
                Err(Error::invalid("selection oracle must be binary"))
            }
            _ => Ok(()),
        }
    }

    fn counts(&self, draws: &[DrawRecord], phase: Phase) -> Result<SelectionCounts> {
        match *self {
            SelectionMechanism::EntropyThreshold(theta) => Ok(selection_counts_from_draws(draws, theta)),
            SelectionMechanism::BinaryOracle(sampler) => {
                let sampled = sampler.sample(phase, draws.len() as u64)?;
                SelectionCounts::from_binary(&sampled.counts)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AcesBranch {
    /// The certification network was certifiably selected; positive radius.
    CertifiedSelection,
    /// The core network was certifiably selected.
    CoreSelection,
    /// Selection undecided but both networks agree.
    Agreement,
    Abstained,
}

impl AcesBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            AcesBranch::CertifiedSelection => "certified_selection",
            AcesBranch::CoreSelection => "core_selection",
            AcesBranch::Agreement => "agreement",
            AcesBranch::Abstained => "abstained",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcesOutcome {
    Decided(usize),
    Abstain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcesVerdict {
    pub outcome: AcesOutcome,
    pub radius: f64,
    pub branch: AcesBranch,
    /// The selection estimated from the `n0` draws.
    pub selected: Route,
    pub p_lower_a: f64,
    pub p_lower_s: f64,
    /// `σ Φ⁻¹(p_S)` when the certification network is certifiably selected.
    pub selection_radius: Option<f64>,
}

impl AcesVerdict {
    pub fn class(&self) -> Option<usize> {
        match self.outcome {
            AcesOutcome::Decided(c) => Some(c),
            AcesOutcome::Abstain => None,
        }
    }

    /// Bitwise equality, treating floats by representation.
    pub fn bit_eq(&self, other: &AcesVerdict) -> bool {
        self.outcome == other.outcome
            && self.branch == other.branch
            && self.selected == other.selected
            && self.radius.to_bits() == other.radius.to_bits()
            && self.p_lower_a.to_bits() == other.p_lower_a.to_bits()
            && self.p_lower_s.to_bits() == other.p_lower_s.to_bits()
            && self.selection_radius.map(f64::to_bits) == other.selection_radius.map(f64::to_bits)
    }
}

/// The threshold-independent half of a certification.
#[derive(Clone, Copy, Debug, PartialEq)]
struct CertifyEstimate {
    top_class: usize,
    p_lower_a: f64,
}

fn half_alpha_confidence(alpha: f64) -> Result<Confidence> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    Confidence::from_alpha(alpha / 2.0)
}

fn estimate(draws: &SampleDraws, num_classes: usize, cfg: &CertificationConfig) -> Result<CertifyEstimate> {
    let top_class = ClassCounts::from_draws(&draws.phase0, num_classes)?.top();
    let counts = ClassCounts::from_draws(&draws.phase1, num_classes)?;
    let conf = half_alpha_confidence(cfg.alpha)?;
    let p_lower_a = clopper_pearson_lower(counts.get(top_class), cfg.n, conf)?.get();
    Ok(CertifyEstimate { top_class, p_lower_a })
}

fn decide(
    est: CertifyEstimate,
    sel0: SelectionCounts,
    sel1: SelectionCounts,
    core_class: usize,
    cfg: &CertificationConfig,
    lower_bound: impl Fn(u64) -> Result<f64>,
) -> Result<AcesVerdict> {
    let selected = if sel0.core > sel0.certification {
        Route::Core
    } else {
        Route::Certification
    };
    let p_lower_s = lower_bound(sel1.get(selected))?;
    let p_lower_a = est.p_lower_a;
    let p_lower = p_lower_a.min(p_lower_s);

    let selection_radius = if selected == Route::Certification && p_lower_s > 0.5 {
        Some(certified_radius(Probability::new(p_lower_s)?, cfg.noise)?)
    } else {
        None
    };

    let (outcome, radius, branch) = if selected == Route::Certification && p_lower > 0.5 {
        let r = certified_radius(Probability::new(p_lower)?, cfg.noise)?;
        (AcesOutcome::Decided(est.top_class), r, AcesBranch::CertifiedSelection)
    } else if selected == Route::Core && p_lower_s >= 0.5 {
        (AcesOutcome::Decided(core_class), 0.0, AcesBranch::CoreSelection)
    } else if est.top_class == core_class && p_lower_a >= 0.5 {
        (AcesOutcome::Decided(est.top_class), 0.0, AcesBranch::Agreement)
    } else {
        (AcesOutcome::Abstain, 0.0, AcesBranch::Abstained)
    };

    Ok(AcesVerdict {
        outcome,
        radius,
        branch,
        selected,
        p_lower_a,
        p_lower_s,
        selection_radius,
    })
}

fn check_core(core_class: usize, num_classes: usize) -> Result<()> {
    if core_class >= num_classes {
        return Err(Error::invalid(format!(
            "core class {core_class} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}

/// Certifies the ACES output for one input from its recorded draws.
pub fn aces_certify(
    draws: &SampleDraws,
    num_classes: usize,
    core_class: usize,
    cfg: &CertificationConfig,
    mech: SelectionMechanism<'_>,
) -> Result<AcesVerdict> {
    cfg.validate()?;
    mech.validate()?;
    draws.check_lengths(cfg.n0, cfg.n)?;
    check_core(core_class, num_classes)?;
    let est = estimate(draws, num_classes, cfg)?;
    let sel0 = mech.counts(&draws.phase0, Phase::Selection)?;
    let sel1 = mech.counts(&draws.phase1, Phase::Estimation)?;
    let conf = half_alpha_confidence(cfg.alpha)?;
    decide(est, sel0, sel1, core_class, cfg, |k| {
        Ok(clopper_pearson_lower(k, cfg.n, conf)?.get())
    })
}

/// How the second prediction branch combines its two conditions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoreBranchRule {
    /// `n_0 > n_1 ∨ p-value(n_0) <= α/2`, the rule as published.
    #[default]
    Disjunction,
    /// `n_0 > n_1 ∧ p-value(n_0) <= α/2`.
    Conjunction,
}

fn predict_from_counts(
    sel: SelectionCounts,
    counts: &ClassCounts,
    core_class: usize,
    alpha: f64,
    rule: CoreBranchRule,
    p_value: impl Fn(u64) -> Result<f64>,
) -> Result<PredictVerdict> {
    let half = alpha / 2.0;
    let n = sel.total();
    let (a, b) = counts.top_two();
    let (na, nb) = (counts.get(a), counts.get(b));
    let rho_a = binom_p_value(na, na + nb, Probability::HALF)?.get();
    let (n0, n1) = (sel.core, sel.certification);
    debug_assert_eq!(n0 + n1, n);

    if n1 > n0 && p_value(n1)? <= half && rho_a <= half {
        return Ok(PredictVerdict::Predicted(a));
    }
    let core_branch = match rule {
        CoreBranchRule::Disjunction => n0 > n1 || p_value(n0)? <= half,
        CoreBranchRule::Conjunction => n0 > n1 && p_value(n0)? <= half,
    };
    if core_branch {
        return Ok(PredictVerdict::Predicted(core_class));
    }
    if a == core_class && rho_a <= half {
        return Ok(PredictVerdict::Predicted(a));
    }
    Ok(PredictVerdict::Abstain)
}

/// Predicts the ACES output (no radius) from one round of draws.
pub fn aces_predict(
    draws: &[DrawRecord],
    num_classes: usize,
    core_class: usize,
    alpha: f64,
    mech: SelectionMechanism<'_>,
    rule: CoreBranchRule,
) -> Result<PredictVerdict> {
    let n = draws.len() as u64;
    if n < 2 {
        return Err(Error::invalid("prediction needs n >= 2"));
    }
    half_alpha_confidence(alpha)?;
    mech.validate()?;
    check_core(core_class, num_classes)?;
    let counts = ClassCounts::from_draws(draws, num_classes)?;
    let sel = mech.counts(draws, Phase::Prediction)?;
    predict_from_counts(sel, &counts, core_class, alpha, rule, |k| {
        Ok(binom_p_value(k, n, Probability::HALF)?.get())
    })
}

/// Selection-network training labels: `1` iff `correct / n >= eta`.
pub fn generate_selection_labels(correct_counts: &[u64], n: u64, eta: f64) -> Result<Vec<bool>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("eta {eta} outside (0, 1]")));
    }
    correct_counts
        .iter()
        .map(|&k| {
            if k > n {
                Err(Error::invalid(format!("correct count {k} exceeds n = {n}")))
            } else {
                Ok(k as f64 / n as f64 >= eta)
            }
        })
        .collect()
}

/// Lazily filled table of a function of a count `0..=n`, shared by threads.
struct CountTable<F> {
    slots: Vec<OnceLock<f64>>,
    f: F,
}

impl<F: Fn(u64) -> Result<f64> + Sync> CountTable<F> {
    fn new(n: u64, f: F) -> Self {
        CountTable {
            slots: (0..=n).map(|_| OnceLock::new()).collect(),
            f,
        }
    }

    fn get(&self, k: u64) -> Result<f64> {
        let slot = &self.slots[k as usize];
        if let Some(v) = slot.get() {
            return Ok(*v);
        }
        let v = (self.f)(k)?;
        Ok(*slot.get_or_init(|| v))
    }
}

fn check_thetas(thetas: &[f64]) -> Result<()> {
    if thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid("thetas must lie in [0, 1]"));
    }
    if thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("thetas must be sorted ascending"));
    }
    Ok(())
}

fn sorted_entropies(draws: &[DrawRecord]) -> Vec<f64> {
    let mut e: Vec<f64> = draws.iter().map(|d| d.entropy).collect();
    e.sort_by(f64::total_cmp);
    e
}

fn selected_at(sorted: &[f64], theta: f64) -> SelectionCounts {
    let k = sorted.partition_point(|&e| e <= theta) as u64;
    SelectionCounts::from_selected(k, sorted.len() as u64)
}

/// Certifies every sample at every threshold without re-sampling.
///
/// The certification-network statistics are computed once per sample; each
/// threshold only re-counts the stored entropies. The result is identical,
/// bit for bit, to calling [`aces_certify`] per threshold. Rows are samples,
/// columns are thresholds.
pub fn sweep_thresholds(
    all_draws: &[SampleDraws],
    core_classes: &[usize],
    num_classes: usize,
    cfg: &CertificationConfig,
    thetas: &[f64],
) -> Result<Vec<Vec<AcesVerdict>>> {
    cfg.validate()?;
    check_thetas(thetas)?;
    if all_draws.len() != core_classes.len() {
        return Err(Error::invalid("one core class per sample is required"));
    }
    let conf = half_alpha_confidence(cfg.alpha)?;
    let bounds = CountTable::new(cfg.n, |k| Ok(clopper_pearson_lower(k, cfg.n, conf)?.get()));

    all_draws
        .par_iter()
        .zip(core_classes.par_iter())
        .map(|(draws, &core)| {
            draws.check_lengths(cfg.n0, cfg.n)?;
            check_core(core, num_classes)?;
            let est = estimate(draws, num_classes, cfg)?;
            let e0 = sorted_entropies(&draws.phase0);
            let e1 = sorted_entropies(&draws.phase1);
            thetas
                .iter()
                .map(|&theta| {
                    decide(est, selected_at(&e0, theta), selected_at(&e1, theta), core, cfg, |k| {
                        bounds.get(k)
                    })
                })
                .collect()
        })
        .collect()
}

/// [`aces_predict`] with the entropy mechanism over a threshold grid, one
/// row per draw sequence.
pub fn predict_sweep(
    draws_per_sample: &[&[DrawRecord]],
    core_classes: &[usize],
    num_classes: usize,
    alpha: f64,
    thetas: &[f64],
    rule: CoreBranchRule,
) -> Result<Vec<Vec<PredictVerdict>>> {
    check_thetas(thetas)?;
    half_alpha_confidence(alpha)?;
    if draws_per_sample.len() != core_classes.len() {
        return Err(Error::invalid("one core class per sample is required"));
    }
    let n = match draws_per_sample.first() {
        Some(d) => d.len() as u64,
        None => return Ok(Vec::new()),
    };
    if n < 2 {
        return Err(Error::invalid("prediction needs n >= 2"));
    }
    let p_values = CountTable::new(n, |k| Ok(binom_p_value(k, n, Probability::HALF)?.get()));

    draws_per_sample
        .par_iter()
        .zip(core_classes.par_iter())
        .map(|(draws, &core)| {
            if draws.len() as u64 != n {
                return Err(Error::invalid("all samples need the same number of draws"));
            }
            check_core(core, num_classes)?;
            let counts = ClassCounts::from_draws(draws, num_classes)?;
            let sorted = sorted_entropies(draws);
            thetas
                .iter()
                .map(|&theta| {
                    predict_from_counts(selected_at(&sorted, theta), &counts, core, alpha, rule, |k| {
                        p_values.get(k)
                    })
                })
                .collect()
        })
        .collect()
}
