mod common;

use aces_core::aces::{
    aces_certify, aces_predict, predict_sweep, selection_counts_from_draws, sweep_thresholds, AcesBranch, AcesVerdict,
    CoreBranchRule, Route, SelectionMechanism,
};
use aces_core::eval::{build_sweep_table, RadiusGrid};
use aces_core::oracle::{DrawRecord, NoiseConfig, SampleDraws};
use aces_core::smoothing::{certified_radius, CertificationConfig};
use aces_core::stats::Probability;
use proptest::prelude::*;

const M: usize = 3;

fn config(n0: u64, n: u64, alpha: f64) -> CertificationConfig {
    CertificationConfig::new(n0, n, alpha, NoiseConfig::new(0.5).unwrap(), 0).unwrap()
}

/// Draws biased toward class 1 and low entropy so every branch is reachable.
fn records(len: usize) -> impl Strategy<Value = Vec<DrawRecord>> {
    prop::collection::vec(
        (
            prop_oneof![3 => Just(1usize), 1 => 0usize..M],
            prop_oneof![0.0f64..=1.0, 0.0f64..0.3],
        ),
        len,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(c, e)| DrawRecord {
                cert_class: c,
                entropy: e,
            })
            .collect()
    })
}

fn sample(n0: usize, n: usize) -> impl Strategy<Value = (SampleDraws, usize)> {
    (records(n0), records(n), 0..M).prop_map(|(phase0, phase1, core)| (SampleDraws { phase0, phase1 }, core))
}

fn thetas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.0f64..=1.0, Just(0.0), Just(1.0)], 1..6).prop_map(|mut t| {
        t.sort_by(f64::total_cmp);
        t
    })
}

fn certify(s: &SampleDraws, core: usize, cfg: &CertificationConfig, theta: f64) -> AcesVerdict {
    aces_certify(s, M, core, cfg, SelectionMechanism::EntropyThreshold(theta)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sweep_matches_per_threshold_certify(
        samples in prop::collection::vec(sample(8, 40), 1..6),
        thetas in thetas(),
        alpha in 0.001f64..0.2,
    ) {
        let cfg = config(8, 40, alpha);
        let draws: Vec<_> = samples.iter().map(|(d, _)| d.clone()).collect();
        let cores: Vec<_> = samples.iter().map(|(_, c)| *c).collect();
        let swept = sweep_thresholds(&draws, &cores, M, &cfg, &thetas).unwrap();
        for ((d, core), row) in samples.iter().zip(&swept) {
            for (&theta, v) in thetas.iter().zip(row) {
                prop_assert!(v.bit_eq(&certify(d, *core, &cfg, theta)), "theta {}", theta);
            }
        }
    }

    #[test]
    fn predict_sweep_matches_per_threshold_predict(
        samples in prop::collection::vec(sample(0, 30), 1..6),
        thetas in thetas(),
        alpha in 0.001f64..0.3,
        strict in any::<bool>(),
    ) {
        let rule = if strict { CoreBranchRule::Conjunction } else { CoreBranchRule::Disjunction };
        let phase1: Vec<&[DrawRecord]> = samples.iter().map(|(d, _)| d.phase1.as_slice()).collect();
        let cores: Vec<_> = samples.iter().map(|(_, c)| *c).collect();
        let swept = predict_sweep(&phase1, &cores, M, alpha, &thetas, rule).unwrap();
        for ((d, core), row) in samples.iter().zip(&swept) {
            for (&theta, v) in thetas.iter().zip(row) {
                let direct =
                    aces_predict(&d.phase1, M, *core, alpha, SelectionMechanism::EntropyThreshold(theta), rule).unwrap();
                prop_assert_eq!(*v, direct);
            }
        }
    }

    #[test]
    fn certification_share_grows_with_threshold(draws in records(50), thetas in thetas()) {
        let counts: Vec<_> = thetas.iter().map(|&t| selection_counts_from_draws(&draws, t)).collect();
        for c in &counts {
            prop_assert_eq!(c.total(), 50);
        }
        for w in counts.windows(2) {
            prop_assert!(w[0].certification <= w[1].certification);
        }
        prop_assert_eq!(selection_counts_from_draws(&draws, 1.0).certification, 50);
    }

    #[test]
    fn branches_are_consistent((d, core) in sample(8, 40), theta in 0.0f64..=1.0, alpha in 0.001f64..0.2) {
        let cfg = config(8, 40, alpha);
        let v = certify(&d, core, &cfg, theta);
        prop_assert_eq!(v.radius > 0.0, v.branch == AcesBranch::CertifiedSelection);
        prop_assert_eq!(v.class().is_none(), v.branch == AcesBranch::Abstained);
        match v.branch {
            AcesBranch::CertifiedSelection => {
                prop_assert_eq!(v.selected, Route::Certification);
                let p = v.p_lower_a.min(v.p_lower_s);
                prop_assert!(p > 0.5);
                prop_assert_eq!(v.radius, certified_radius(Probability::new(p).unwrap(), cfg.noise).unwrap());
                prop_assert!(v.radius <= v.selection_radius.unwrap());
            }
            AcesBranch::CoreSelection => {
                prop_assert_eq!(v.selected, Route::Core);
                prop_assert_eq!(v.class(), Some(core));
            }
            AcesBranch::Agreement => prop_assert_eq!(v.class(), Some(core)),
            AcesBranch::Abstained => {}
        }
        prop_assert_eq!(v.selection_radius.is_some(), v.selected == Route::Certification && v.p_lower_s > 0.5);
    }

    #[test]
    fn looser_alpha_never_shrinks_a_certificate(
        (d, core) in sample(8, 60),
        theta in 0.0f64..=1.0,
        a in 0.001f64..0.2,
        b in 0.001f64..0.2,
    ) {
        let tight = certify(&d, core, &config(8, 60, a.min(b)), theta);
        let loose = certify(&d, core, &config(8, 60, a.max(b)), theta);
        prop_assert!(tight.p_lower_a <= loose.p_lower_a);
        prop_assert!(tight.p_lower_s <= loose.p_lower_s);
        prop_assert!(tight.radius <= loose.radius);
        if tight.class().is_some() {
            prop_assert_eq!(tight.class(), loose.class());
        }
    }

    #[test]
    fn strict_rule_decisions_agree_with_printed_rule(
        (d, core) in sample(0, 40),
        theta in 0.0f64..=1.0,
        alpha in 0.001f64..0.3,
    ) {
        let mech = SelectionMechanism::EntropyThreshold(theta);
        let strict = aces_predict(&d.phase1, M, core, alpha, mech, CoreBranchRule::Conjunction).unwrap();
        let printed = aces_predict(&d.phase1, M, core, alpha, mech, CoreBranchRule::Disjunction).unwrap();
        if strict.class().is_some() {
            prop_assert_eq!(strict, printed);
        }
    }
}

#[test]
fn sweep_table_matches_direct_evaluation() {
    let ds = common::dataset(&common::three_class(), 2, 20, 30, 300, 0.4, 17);
    let alpha = 0.01;
    let thetas = [0.0, 0.2, 0.35, 0.5, 0.8, 1.0];
    let grid = RadiusGrid::new(vec![0.0, 0.1, 0.3, 0.6]).unwrap();
    let table = build_sweep_table(&ds, alpha, &thetas, &grid, CoreBranchRule::Disjunction).unwrap();
    let cfg = ds.certification_config(alpha).unwrap();
    let total = ds.samples.len() as f64;

    for (row, &theta) in table.rows.iter().zip(&thetas) {
        let mut correct = 0.0;
        let mut radius_sum = 0.0;
        let mut ca = vec![0.0; grid.len()];
        let mut sr = vec![0.0; grid.len()];
        for s in &ds.samples {
            let (y, core) = (s.header.label, s.header.core_prediction);
            let mech = SelectionMechanism::EntropyThreshold(theta);
            let p = aces_predict(&s.draws.phase1, M, core, alpha, mech, CoreBranchRule::Disjunction).unwrap();
            if p.class() == Some(y) {
                correct += 1.0;
            }
            let v = certify(&s.draws, core, &cfg, theta);
            if v.class() == Some(y) {
                radius_sum += v.radius;
            }
            for (j, &r) in grid.radii().iter().enumerate() {
                if v.class() == Some(y) && v.radius >= r {
                    ca[j] += 1.0;
                }
                if v.selection_radius.is_some_and(|q| q >= r) {
                    sr[j] += 1.0;
                }
            }
        }
        assert_eq!(row.theta, theta);
        assert_eq!(row.nac, correct / total);
        assert!((row.acr - radius_sum / total).abs() < 1e-15);
        assert_eq!(row.certified_accuracy, ca.iter().map(|c| c / total).collect::<Vec<_>>());
        assert_eq!(row.selection_rate, sr.iter().map(|c| c / total).collect::<Vec<_>>());
        assert!(row.certified_accuracy.windows(2).all(|w| w[0] >= w[1]));
    }
    // the certification network is used more as the threshold rises
    let sr0: Vec<_> = table.rows.iter().map(|r| r.selection_rate[0]).collect();
    assert!(sr0.first() <= sr0.last(), "{sr0:?}");
}
