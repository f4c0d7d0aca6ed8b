//! Datasets written the way a Python exporter writes them: `json.dump`
//! manifests with arbitrary key order, `repr` floats, rows in any order.

use std::fmt::Write;
use std::fs;

use aces_core::aces::{aces_certify, generate_selection_labels, SelectionMechanism};
use aces_core::eval::{build_sweep_table, RadiusGrid};
use aces_core::rng::CounterRng;
use aces_core::store::read_dataset;

/// Python's `repr(float)`: shortest round-trip digits, scientific notation
/// below 1e-4 or from 1e16, two-digit exponents, `.0` on integral values.
fn py_repr(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{x:e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..16).contains(&exp) {
        let plain = format!("{x}");
        if plain.contains('.') {
            plain
        } else {
            plain + ".0"
        }
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

struct ToyExport {
    dir: tempfile::TempDir,
    classes: Vec<Vec<usize>>,
    entropies: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

/// A toy 3-class model: 20 samples, n0 = 10, n = 100.
fn export() -> ToyExport {
    let (samples, n0, n) = (20u64, 10u64, 100u64);
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("manifest.json"),
        format!(
            "{{\n  \"sigma\": 0.25,\n  \"num_classes\": 3,\n  \"n\": {n},\n  \"n0\": {n0},\n  \"num_samples\": {samples},\n  \"base_seed\": 0,\n  \"format_version\": 1,\n  \"source\": \"toy torch model\"\n}}"
        ),
    )
    .unwrap();

    let mut samples_csv = String::from("sample_id,label,core_prediction\n");
    let mut rows = Vec::new();
    let mut classes = Vec::new();
    let mut entropies = Vec::new();
    let mut labels = Vec::new();
    for i in 0..samples {
        let rng = CounterRng::from_words(&[99, i]);
        let label = (i % 3) as usize;
        labels.push(label);
        let _ = writeln!(samples_csv, "{i},{label},{}", (label + (i % 7 == 6) as usize) % 3);
        let mut cls = Vec::new();
        let mut ent = Vec::new();
        for j in 0..n0 + n {
            let u = rng.uniform_at(j);
            let class = if u < 0.8 {
                label
            } else {
                (label + 1 + (u > 0.9) as usize) % 3
            };
            let entropy = match j % 5 {
                0 => 0.0,
                1 => 1.0,
                2 => 1e-5 * u,
                _ => u,
            };
            cls.push(class);
            ent.push(entropy);
            let (phase, index) = if j < n0 { (0, j) } else { (1, j - n0) };
            rows.push(format!("{i},{phase},{index},{class},{}", py_repr(entropy)));
        }
        classes.push(cls);
        entropies.push(ent);
    }
    fs::write(dir.path().join("samples.csv"), samples_csv).unwrap();

    // deterministic shuffle
    let order = CounterRng::from_words(&[5]);
    let mut keyed: Vec<_> = rows
        .into_iter()
        .enumerate()
        .map(|(k, r)| (order.uniform_at(k as u64), r))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut draws_csv = String::from("sample_id,phase,draw_index,cert_class,entropy\n");
    for (_, r) in keyed {
        draws_csv.push_str(&r);
        draws_csv.push('\n');
    }
    fs::write(dir.path().join("draws.csv"), draws_csv).unwrap();
    ToyExport {
        dir,
        classes,
        entropies,
        labels,
    }
}

#[test]
fn python_float_repr_matches_reference_strings() {
    let cases = [
        (0.1, "0.1"),
        (1.0, "1.0"),
        (1e-5, "1e-05"),
        (0.30000000000000004, "0.30000000000000004"),
        (5e-324, "5e-324"),
        (0.0001, "0.0001"),
        (1.2345e-7, "1.2345e-07"),
    ];
    for (x, want) in cases {
        assert_eq!(py_repr(x), want);
    }
}

#[test]
fn exporter_output_is_accepted_exactly() {
    let toy = export();
    let ds = read_dataset(toy.dir.path()).unwrap();
    assert_eq!(ds.manifest.num_classes, 3);
    assert_eq!(ds.manifest.source, "toy torch model");
    assert_eq!(ds.samples.len(), 20);
    assert_eq!(ds.labels(), toy.labels);
    for (s, (cls, ent)) in ds.samples.iter().zip(toy.classes.iter().zip(&toy.entropies)) {
        let draws: Vec<_> = s.draws.phase0.iter().chain(&s.draws.phase1).collect();
        assert_eq!(draws.len(), 110);
        for ((d, &c), &e) in draws.iter().zip(cls).zip(ent) {
            assert_eq!(d.cert_class, c);
            assert_eq!(d.entropy.to_bits(), e.to_bits());
        }
    }

    let cfg = ds.certification_config(0.01).unwrap();
    for s in &ds.samples {
        aces_certify(
            &s.draws,
            3,
            s.header.core_prediction,
            &cfg,
            SelectionMechanism::EntropyThreshold(0.5),
        )
        .unwrap();
    }
    let table = build_sweep_table(&ds, 0.01, &[0.0, 0.5, 1.0], &RadiusGrid::standard(), Default::default()).unwrap();
    assert_eq!(table.rows.len(), 3);
}

#[test]
fn selection_labels_from_exported_counts() {
    let toy = export();
    let ds = read_dataset(toy.dir.path()).unwrap();
    let n = ds.manifest.n;
    let counts: Vec<u64> = ds
        .samples
        .iter()
        .map(|s| s.draws.phase1.iter().filter(|d| d.cert_class == s.header.label).count() as u64)
        .collect();
    let labels = generate_selection_labels(&counts, n, 0.8).unwrap();
    for (k, l) in counts.iter().zip(&labels) {
        assert_eq!(*l, *k >= 80);
    }
    assert!(generate_selection_labels(&counts, n, 1.0)
        .unwrap()
        .iter()
        .zip(&counts)
        .all(|(l, &k)| *l == (k == n)));
}
