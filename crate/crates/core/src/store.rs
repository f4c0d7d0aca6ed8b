//! On-disk dataset of recorded draws.
//!
//! A dataset directory holds three files:
//!
//! * `manifest.json`: a [`DatasetManifest`];
//! * `samples.csv`: `sample_id,label,core_prediction`;
//! * `draws.csv`: `sample_id,phase,draw_index,cert_class,entropy` with
//!   `phase` 0 for the `n0` selection draws and 1 for the `n` estimation
//!   draws.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly. Files are UTF-8 with LF line endings. The reader accepts
//! draw rows in any order and validates every invariant before returning.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{DrawRecord, NoiseConfig, SampleDraws};
use crate::smoothing::CertificationConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const DRAWS_FILE: &str = "draws.csv";

const SAMPLES_HEADER: [&str; 3] = ["sample_id", "label", "core_prediction"];
const DRAWS_HEADER: [&str; 5] = ["sample_id", "phase", "draw_index", "cert_class", "entropy"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub num_classes: usize,
    pub sigma: f64,
    pub n0: u64,
    pub n: u64,
    pub base_seed: u64,
    pub num_samples: u64,
    #[serde(default)]
    pub source: String,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::validation(
                "format_version",
                None,
                format!("unsupported format version {}", self.format_version),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::validation("num_classes", None, "at least 2 classes required"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::validation(
                "sigma",
                None,
                format!("sigma {} must be positive", self.sigma),
            ));
        }
        if self.n0 == 0 {
            return Err(Error::validation("n0", None, "n0 must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::validation("n", None, "n must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub sample_id: u64,
    pub label: usize,
    pub core_prediction: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub header: SampleHeader,
    pub draws: SampleDraws,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<SampleRecord>,
}

impl Dataset {
    /// Checks every invariant the reader enforces.
    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        m.validate()?;
        if m.num_samples != self.samples.len() as u64 {
            return Err(Error::validation(
                "num_samples",
                None,
                format!(
                    "manifest declares {} samples, found {}",
                    m.num_samples,
                    self.samples.len()
                ),
            ));
        }
        for (i, s) in self.samples.iter().enumerate() {
            let h = &s.header;
            if h.sample_id != i as u64 {
                return Err(Error::validation(
                    "sample_id",
                    None,
                    format!("expected dense id {i}, found {}", h.sample_id),
                ));
            }
            check_class("label", h.label, m.num_classes, None)?;
            check_class("core_prediction", h.core_prediction, m.num_classes, None)?;
            for (phase, draws, want) in [(0, &s.draws.phase0, m.n0), (1, &s.draws.phase1, m.n)] {
                if draws.len() as u64 != want {
                    return Err(Error::validation(
                        "draws",
                        None,
                        format!("sample {i} phase {phase} has {} draws, expected {want}", draws.len()),
                    ));
                }
                for d in draws {
                    check_class("cert_class", d.cert_class, m.num_classes, None)?;
                    check_entropy(d.entropy, None)?;
                }
            }
        }
        Ok(())
    }

    pub fn core_predictions(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.header.core_prediction).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.header.label).collect()
    }

    /// The certification settings the draws were recorded under.
    pub fn certification_config(&self, alpha: f64) -> Result<CertificationConfig> {
        let m = &self.manifest;
        CertificationConfig::new(m.n0, m.n, alpha, NoiseConfig::new(m.sigma)?, m.base_seed)
    }
}

fn check_class(field: &'static str, class: usize, m: usize, line: Option<u64>) -> Result<()> {
    if class >= m {
        return Err(Error::validation(
            field,
            line,
            format!("class {class} out of range for {m} classes"),
        ));
    }
    Ok(())
}

fn check_entropy(e: f64, line: Option<u64>) -> Result<()> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::validation(
            "entropy",
            line,
            format!("entropy {e} outside [0, 1]"),
        ));
    }
    Ok(())
}

/// Formats like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `dataset` into directory `dir`, creating it if needed.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    dataset
        .validate()
        .map_err(|e| Error::invalid(format!("refusing to write dataset: {e}")))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&dataset.manifest)
        .map_err(|e| Error::Invariant(format!("manifest serialization failed: {e}")))?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SAMPLES_FILE);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", SAMPLES_HEADER.join(",")).map_err(io)?;
    for s in &dataset.samples {
        let h = s.header;
        writeln!(w, "{},{},{}", h.sample_id, h.label, h.core_prediction).map_err(io)?;
    }
    finish(&path, w)?;

    let path = dir.join(DRAWS_FILE);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", DRAWS_HEADER.join(",")).map_err(io)?;
    for s in &dataset.samples {
        for (phase, draws) in [(0, &s.draws.phase0), (1, &s.draws.phase1)] {
            for (i, d) in draws.iter().enumerate() {
                writeln!(
                    w,
                    "{},{phase},{i},{},{}",
                    s.header.sample_id,
                    d.cert_class,
                    format_g17(d.entropy)
                )
                .map_err(io)?;
            }
        }
    }
    finish(&path, w)
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| parse_error(path, 1, e))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            file: file_label(path),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(reader)
}

fn parse_error(path: &Path, line: u64, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        file: file_label(path),
        line,
        message: e.to_string(),
    }
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    index: usize,
    name: &str,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = record
        .get(index)
        .ok_or_else(|| parse_error(path, line, format!("missing column `{name}`")))?;
    raw.parse()
        .map_err(|e| parse_error(path, line, format!("column `{name}` value `{raw}`: {e}")))
}

fn records(
    path: &Path,
    reader: &mut csv::Reader<File>,
    columns: usize,
    mut each: impl FnMut(u64, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e)
        })?;
        if !more {
            return Ok(());
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns {
            return Err(parse_error(
                path,
                line,
                format!("expected {columns} columns, found {}", record.len()),
            ));
        }
        each(line, &record)?;
    }
}

/// Reads and validates the dataset stored in `dir`.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: file_label(&path),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    manifest.validate()?;
    let m = manifest.num_classes;

    let path = dir.join(SAMPLES_FILE);
    let mut reader = open_csv(&path, &SAMPLES_HEADER)?;
    let mut headers = Vec::new();
    records(&path, &mut reader, 3, |line, r| {
        let h = SampleHeader {
            sample_id: field(&path, line, r, 0, "sample_id")?,
            label: field(&path, line, r, 1, "label")?,
            core_prediction: field(&path, line, r, 2, "core_prediction")?,
        };
        if h.sample_id != headers.len() as u64 {
            return Err(Error::validation(
                "sample_id",
                Some(line),
                format!("expected dense id {}, found {}", headers.len(), h.sample_id),
            ));
        }
        check_class("label", h.label, m, Some(line))?;
        check_class("core_prediction", h.core_prediction, m, Some(line))?;
        headers.push(h);
        Ok(())
    })?;
    if headers.len() as u64 != manifest.num_samples {
        return Err(Error::validation(
            "num_samples",
            None,
            format!(
                "manifest declares {} samples, samples.csv has {}",
                manifest.num_samples,
                headers.len()
            ),
        ));
    }

    let path = dir.join(DRAWS_FILE);
    let mut reader = open_csv(&path, &DRAWS_HEADER)?;
    let lengths = [manifest.n0 as usize, manifest.n as usize];
    let mut slots: Vec<[Vec<Option<DrawRecord>>; 2]> = headers
        .iter()
        .map(|_| [vec![None; lengths[0]], vec![None; lengths[1]]])
        .collect();
    records(&path, &mut reader, 5, |line, r| {
        let sample_id: u64 = field(&path, line, r, 0, "sample_id")?;
        let phase: u8 = field(&path, line, r, 1, "phase")?;
        let draw_index: u64 = field(&path, line, r, 2, "draw_index")?;
        let cert_class: usize = field(&path, line, r, 3, "cert_class")?;
        let entropy: f64 = field(&path, line, r, 4, "entropy")?;
        let sample = slots
            .get_mut(sample_id as usize)
            .ok_or_else(|| Error::validation("sample_id", Some(line), format!("unknown sample {sample_id}")))?;
        if phase > 1 {
            return Err(Error::validation(
                "phase",
                Some(line),
                format!("phase {phase} not in {{0, 1}}"),
            ));
        }
        let slot = sample[phase as usize].get_mut(draw_index as usize).ok_or_else(|| {
            Error::validation(
                "draw_index",
                Some(line),
                format!(
                    "index {draw_index} exceeds the {} draws of phase {phase}",
                    lengths[phase as usize]
                ),
            )
        })?;
        check_class("cert_class", cert_class, m, Some(line))?;
        check_entropy(entropy, Some(line))?;
        if slot.is_some() {
            return Err(Error::validation(
                "draw_index",
                Some(line),
                format!("duplicate draw {draw_index} for sample {sample_id} phase {phase}"),
            ));
        }
        *slot = Some(DrawRecord { cert_class, entropy });
        Ok(())
    })?;

    let mut samples = Vec::with_capacity(headers.len());
    for (header, [p0, p1]) in headers.into_iter().zip(slots) {
        let mut phases = [p0, p1].into_iter().enumerate().map(|(phase, slots)| {
            let present = slots.iter().filter(|s| s.is_some()).count();
            if present != slots.len() {
                return Err(Error::validation(
                    "draws",
                    None,
                    format!(
                        "sample {} phase {phase} has {present} draws, expected {}",
                        header.sample_id,
                        slots.len()
                    ),
                ));
            }
            Ok(slots.into_iter().flatten().collect::<Vec<_>>())
        });
        let phase0 = phases.next().expect("two phases")?;
        let phase1 = phases.next().expect("two phases")?;
        samples.push(SampleRecord {
            header,
            draws: SampleDraws { phase0, phase1 },
        });
    }
    Ok(Dataset { manifest, samples })
}

/// The three file paths of a dataset directory.
pub fn dataset_files(dir: &Path) -> [PathBuf; 3] {
    [dir.join(MANIFEST_FILE), dir.join(SAMPLES_FILE), dir.join(DRAWS_FILE)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_c_printf() {
        // reference strings from C printf("%.17g")
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(0.0001), "0.0001");
        assert_eq!(format_g17(2.5e-300), "2.5e-300");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(1e17), "1e+17");
    }

    #[test]
    fn g17_round_trips() {
        let mut x = 1e-310_f64;
        while x < 1.0 {
            let back: f64 = format_g17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
            x *= 1.618_033_988_749_895;
        }
    }
}
