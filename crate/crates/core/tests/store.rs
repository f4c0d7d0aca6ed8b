mod common;

use std::fs;
use std::path::Path;

use aces_core::oracle::{DrawRecord, SampleDraws};
use aces_core::store::{read_dataset, write_dataset, Dataset, DatasetManifest, SampleHeader, SampleRecord};
use aces_core::Error;
use proptest::prelude::*;

fn manifest(num_samples: u64, n0: u64, n: u64) -> DatasetManifest {
    DatasetManifest {
        format_version: 1,
        num_classes: 3,
        sigma: 0.25,
        n0,
        n,
        base_seed: 42,
        num_samples,
        source: "unit".into(),
    }
}

fn small() -> Dataset {
    let rec = |c, e| DrawRecord {
        cert_class: c,
        entropy: e,
    };
    Dataset {
        manifest: manifest(1, 2, 3),
        samples: vec![SampleRecord {
            header: SampleHeader {
                sample_id: 0,
                label: 1,
                core_prediction: 2,
            },
            draws: SampleDraws {
                phase0: vec![rec(1, 0.1), rec(2, 1.0 / 3.0)],
                phase1: vec![rec(0, 0.0), rec(1, 1.0), rec(1, 5e-324)],
            },
        }],
    }
}

fn rewrite(path: &Path, f: impl FnOnce(String) -> String) {
    let text = fs::read_to_string(path).unwrap();
    fs::write(path, f(text)).unwrap();
}

fn validation_field(e: Error) -> &'static str {
    match e {
        Error::Validation { field, .. } => field,
        other => panic!("expected a validation error, got {other}"),
    }
}

#[test]
fn empty_dataset_has_header_only_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let ds = Dataset {
        manifest: manifest(0, 1, 1),
        samples: vec![],
    };
    write_dataset(&ds, dir.path()).unwrap();
    assert_eq!(
        fs::read_to_string(dir.path().join("samples.csv")).unwrap(),
        "sample_id,label,core_prediction\n"
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("draws.csv")).unwrap(),
        "sample_id,phase,draw_index,cert_class,entropy\n"
    );
    assert_eq!(read_dataset(dir.path()).unwrap(), ds);
}

#[test]
fn one_sample_writes_n0_plus_n_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    let draws = fs::read_to_string(dir.path().join("draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 1 + 5);
    assert!(draws.contains("0,0,1,2,0.33333333333333331\n"));
    assert!(draws.contains("0,1,2,1,4.9406564584124654e-324\n"));
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::dataset(&common::three_class(), 2, 12, 7, 40, 0.3, 8);
    write_dataset(&ds, dir.path()).unwrap();
    let back = read_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
    for (a, b) in back.samples.iter().zip(&ds.samples) {
        for (x, y) in a.draws.phase1.iter().zip(&b.draws.phase1) {
            assert_eq!(x.entropy.to_bits(), y.entropy.to_bits());
        }
    }
}

#[test]
fn entropy_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("draws.csv"), |t| {
        t.replace("0,1,1,1,1\n", "0,1,1,1,1.5\n")
    });
    let err = read_dataset(dir.path()).unwrap_err();
    assert!(err.to_string().contains("entropy"));
    assert!(matches!(
        err,
        Error::Validation {
            field: "entropy",
            line: Some(5),
            ..
        }
    ));
}

#[test]
fn missing_draw_row_is_a_length_error() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("draws.csv"), |t| t.replace("0,1,1,1,1\n", ""));
    assert_eq!(validation_field(read_dataset(dir.path()).unwrap_err()), "draws");
}

#[test]
fn rows_in_any_order_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("draws.csv"), |t| {
        let mut lines: Vec<_> = t.lines().collect();
        let header = lines.remove(0);
        lines.reverse();
        format!("{header}\n{}\n", lines.join("\n"))
    });
    assert_eq!(read_dataset(dir.path()).unwrap(), small());
}

#[test]
fn duplicate_draw_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("draws.csv"), |t| {
        t.replace("0,1,1,1,1\n", "0,1,0,1,1\n")
    });
    assert_eq!(validation_field(read_dataset(dir.path()).unwrap_err()), "draw_index");
}

#[test]
fn invariant_violations_name_the_field() {
    let cases: [(&str, &str, &str, &str); 6] = [
        ("samples.csv", "0,1,2\n", "0,3,2\n", "label"),
        ("samples.csv", "0,1,2\n", "1,1,2\n", "sample_id"),
        ("draws.csv", "0,0,0,1,", "0,2,0,1,", "phase"),
        ("draws.csv", "0,0,0,1,", "0,0,0,7,", "cert_class"),
        ("draws.csv", "0,0,0,1,", "4,0,0,1,", "sample_id"),
        (
            "manifest.json",
            "\"num_samples\": 1",
            "\"num_samples\": 2",
            "num_samples",
        ),
    ];
    for (file, from, to, field) in cases {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&small(), dir.path()).unwrap();
        rewrite(&dir.path().join(file), |t| t.replacen(from, to, 1));
        assert_eq!(
            validation_field(read_dataset(dir.path()).unwrap_err()),
            field,
            "{file}: {to}"
        );
    }
}

#[test]
fn unknown_format_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("manifest.json"), |t| {
        t.replace("\"format_version\": 1", "\"format_version\": 2")
    });
    assert_eq!(
        validation_field(read_dataset(dir.path()).unwrap_err()),
        "format_version"
    );
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("draws.csv"), |t| {
        t.replace("0,1,1,1,1\n", "0,1,1,one,1\n")
    });
    match read_dataset(dir.path()).unwrap_err() {
        Error::Parse { line, message, .. } => {
            assert_eq!(line, 5);
            assert!(message.contains("cert_class"));
        }
        other => panic!("expected a parse error, got {other}"),
    }

    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("draws.csv"), |t| t.replace("0,1,1,1,1\n", "0,1,1,1\n"));
    assert!(matches!(
        read_dataset(dir.path()).unwrap_err(),
        Error::Parse { line: 5, .. }
    ));

    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("samples.csv"), |t| {
        t.replace("core_prediction", "core")
    });
    assert!(matches!(
        read_dataset(dir.path()).unwrap_err(),
        Error::Parse { line: 1, .. }
    ));
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_dataset(&dir.path().join("absent")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn writer_rejects_length_mismatch() {
    let mut ds = small();
    ds.samples[0].draws.phase1.pop();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(write_dataset(&ds, dir.path()), Err(Error::InvalidArgument(_))));
}

#[test]
fn manifest_without_source_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&small(), dir.path()).unwrap();
    rewrite(&dir.path().join("manifest.json"), |t| {
        t.replace(",\n  \"source\": \"unit\"", "")
    });
    assert_eq!(read_dataset(dir.path()).unwrap().manifest.source, "");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_valid_dataset_round_trips(
        samples in prop::collection::vec(
            (0usize..4, 0usize..4,
             prop::collection::vec((0usize..4, 0.0f64..=1.0), 3),
             prop::collection::vec((0usize..4, prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0, 0.0f64..1e-300]), 5)),
            0..6),
    ) {
        let ds = Dataset {
            manifest: DatasetManifest { num_classes: 4, ..manifest(samples.len() as u64, 3, 5) },
            samples: samples
                .into_iter()
                .enumerate()
                .map(|(i, (label, core, p0, p1))| {
                    let to = |v: Vec<(usize, f64)>| v.into_iter().map(|(c, e)| DrawRecord { cert_class: c, entropy: e }).collect();
                    SampleRecord {
                        header: SampleHeader { sample_id: i as u64, label, core_prediction: core },
                        draws: SampleDraws { phase0: to(p0), phase1: to(p1) },
                    }
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        prop_assert_eq!(read_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn arbitrary_draw_lines_never_panic(line in "[0-9a-z.,e-]{0,24}") {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&small(), dir.path()).unwrap();
        rewrite(&dir.path().join("draws.csv"), |t| format!("{t}{line}\n"));
        // either a diagnostic or (for a blank line) acceptance
        let _ = read_dataset(dir.path());
    }
}
