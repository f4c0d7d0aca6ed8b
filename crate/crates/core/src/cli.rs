//! Command-line front end.
//!
//! Every command is a pure function of its resolved [`RunConfig`] and input
//! files: outputs are byte-identical across runs and thread counts.
//! Settings come from flags, optionally layered over a TOML file given with
//! `--config`; flags win.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aces::{aces_certify, CoreBranchRule, SelectionMechanism};
use crate::error::{Error, Result};
use crate::eval::{build_sweep_table, run_coverage_experiment, CoverageConfig, CoverageFixture, RadiusGrid};
use crate::oracle::{collect_draws, true_smoothed_prob, LinearSyntheticClassifier, NoiseConfig, OraclePoint};
use crate::rng::CounterRng;
use crate::smoothing::{rs_certify_draws, CertificationConfig, SmoothedVerdict};
use crate::store::{format_g17, read_dataset, write_dataset, Dataset, DatasetManifest, SampleHeader, SampleRecord};

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_N0: u64 = 100;
pub const DEFAULT_N: u64 = 100_000;
pub const DEFAULT_ALPHA: f64 = 0.001;
pub const DEFAULT_THETA: f64 = 0.5;
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

const LAYOUT_TAG: u64 = 0x6c61_796f_7574;
const LABEL_TAG: u64 = 0x006c_6162_656c;

/// One entry of a threshold or radius list: a value or `start:stop:step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridItem {
    Value(f64),
    Range(String),
}

impl std::str::FromStr for GridItem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains(':') {
            Ok(GridItem::Range(s.to_string()))
        } else {
            s.trim()
                .parse()
                .map(GridItem::Value)
                .map_err(|_| Error::invalid(format!("`{s}` is neither a number nor start:stop:step")))
        }
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("`{s}` is not a number")))
}

/// Expands a list of values and inclusive `start:stop:step` ranges.
///
/// Range points are rounded to 12 decimals so `0:1:0.1` yields `0.3`
/// rather than `0.30000000000000004`.
pub fn expand_grid(items: &[GridItem]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in items {
        match item {
            GridItem::Value(v) => out.push(*v),
            GridItem::Range(spec) => {
                let parts: Vec<_> = spec.split(':').collect();
                let [start, stop, step] = parts[..] else {
                    return Err(Error::invalid(format!("range `{spec}` is not start:stop:step")));
                };
                let (start, stop, step) = (parse_num(start)?, parse_num(stop)?, parse_num(step)?);
                if !(step > 0.0 && stop >= start && (stop - start) / step <= 1e6) {
                    return Err(Error::invalid(format!("range `{spec}` is empty or unbounded")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as u64;
                out.extend((0..=count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12));
            }
        }
    }
    Ok(out)
}

/// All settings of a run. Unset fields fall back to command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sigma: Option<f64>,
    pub n0: Option<u64>,
    pub n: Option<u64>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub theta: Option<Vec<GridItem>>,
    pub radii: Option<Vec<GridItem>>,
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[serde(rename = "out")]
    pub output: Option<PathBuf>,
    pub trials: Option<u64>,
    pub parallelism: Option<usize>,
    pub strict_predict: Option<bool>,
    pub rs_only: Option<bool>,
    pub samples: Option<u64>,
    pub dim: Option<usize>,
    pub weight: Option<Vec<f64>>,
    pub bias: Option<f64>,
    pub temperature: Option<f64>,
    pub spread: Option<f64>,
    pub label_noise: Option<f64>,
    pub core_error_rate: Option<f64>,
    pub fixture: Option<FixtureKind>,
    pub core_class: Option<usize>,
    pub points: Option<Vec<Vec<f64>>>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() as u64 + 1),
            message: e.message().to_string(),
        })
    }

    /// Fields set in `self` win over those of `base`.
    pub fn overlay(self, base: RunConfig) -> RunConfig {
        overlay!(
            self,
            base,
            sigma,
            n0,
            n,
            alpha,
            seed,
            theta,
            radii,
            input,
            output,
            trials,
            parallelism,
            strict_predict,
            rs_only,
            samples,
            dim,
            weight,
            bias,
            temperature,
            spread,
            label_noise,
            core_error_rate,
            fixture,
            core_class,
            points
        )
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    fn noise(&self) -> Result<NoiseConfig> {
        NoiseConfig::new(self.sigma.unwrap_or(DEFAULT_SIGMA))
    }

    fn certification(&self) -> Result<CertificationConfig> {
        CertificationConfig::new(
            self.n0.unwrap_or(DEFAULT_N0),
            self.n.unwrap_or(DEFAULT_N),
            self.alpha(),
            self.noise()?,
            self.seed.unwrap_or(0),
        )
    }

    fn thetas(&self, default: &[f64]) -> Result<Vec<f64>> {
        let thetas = match &self.theta {
            Some(items) => expand_grid(items)?,
            None => default.to_vec(),
        };
        if thetas.is_empty() {
            return Err(Error::invalid("no thresholds given"));
        }
        if thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("thresholds must lie in [0, 1]"));
        }
        if thetas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("thresholds must be strictly ascending"));
        }
        Ok(thetas)
    }

    fn grid(&self) -> Result<RadiusGrid> {
        match &self.radii {
            Some(items) => RadiusGrid::new(expand_grid(items)?),
            None => Ok(RadiusGrid::standard()),
        }
    }

    fn rule(&self) -> CoreBranchRule {
        if self.strict_predict.unwrap_or(false) {
            CoreBranchRule::Conjunction
        } else {
            CoreBranchRule::Disjunction
        }
    }

    fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::invalid("--in is required"))
    }

    fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::invalid("--out is required"))
    }

    fn distinct_paths(&self) -> Result<()> {
        let (input, output) = (self.input()?, self.output()?);
        let absolute = |p: &Path| std::path::absolute(p).map_err(|e| Error::io(p, e));
        if absolute(input)? == absolute(output)? {
            return Err(Error::invalid("input and output paths must differ"));
        }
        Ok(())
    }

    fn classifier(&self, default_weight: &[f64]) -> Result<LinearSyntheticClassifier> {
        let weight = match (&self.weight, self.dim) {
            (Some(w), Some(d)) if w.len() != d => {
                return Err(Error::invalid(format!("weight has {} entries but dim is {d}", w.len())))
            }
            (Some(w), _) => w.clone(),
            (None, Some(d)) => {
                if d == 0 {
                    return Err(Error::invalid("dim must be at least 1"));
                }
                let mut w = vec![0.0; d];
                w[0] = 1.0;
                w
            }
            (None, None) => default_weight.to_vec(),
        };
        LinearSyntheticClassifier::new(weight, self.bias.unwrap_or(0.0), self.temperature.unwrap_or(1.0))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Smoothing,
    #[default]
    Aces,
}

#[derive(Debug, Parser)]
#[command(
    name = "aces",
    version,
    about = "Certify randomized-smoothing and ACES classifiers from recorded noise draws"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the linear synthetic classifier under noise and write a dataset.
    GenSynthetic(GenArgs),
    /// Certify every sample of a dataset and write one verdict row per sample.
    Certify(CertifyArgs),
    /// Evaluate a grid of selection thresholds and write the metric table.
    Sweep(SweepArgs),
    /// Measure how often certificates contradict a closed-form ground truth.
    Coverage(CoverageArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML file with default settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output dataset directory.
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Noise standard deviation (default 0.5).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Selection-phase draws per sample (default 100).
    #[arg(long)]
    pub n0: Option<u64>,
    /// Estimation-phase draws per sample (default 100000).
    #[arg(long)]
    pub n: Option<u64>,
    /// Base seed of the noise streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of samples.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Input dimension when no weight is given.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated weight vector of the linear classifier.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weight: Option<Vec<f64>>,
    /// Bias of the linear classifier.
    #[arg(long, allow_hyphen_values = true)]
    pub bias: Option<f64>,
    /// Softmax temperature of the linear classifier.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Standard deviation of the clean sample positions.
    #[arg(long)]
    pub spread: Option<f64>,
    /// Probability that a label disagrees with the linear classifier.
    #[arg(long)]
    pub label_noise: Option<f64>,
    /// Probability that the core prediction disagrees with the label.
    #[arg(long)]
    pub core_error_rate: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input dataset directory.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output verdict CSV.
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Overall failure probability (default 0.001).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Selection threshold (single value).
    #[arg(long)]
    pub theta: Option<GridItem>,
    /// Certify the certification network alone, without selection.
    #[arg(long)]
    pub rs_only: bool,
}

#[derive(Debug, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input dataset directory.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output table CSV.
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Overall failure probability (default 0.001).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Threshold value or start:stop:step range; repeatable.
    #[arg(long)]
    pub theta: Vec<GridItem>,
    /// Comma-separated radii or start:stop:step ranges.
    #[arg(long, value_delimiter = ',')]
    pub radii: Vec<GridItem>,
    /// Require both conditions of the core-selection prediction branch.
    #[arg(long)]
    pub strict_predict: bool,
}

#[derive(Debug, Default, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output JSON report.
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Noise standard deviation (default 0.5).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Selection-phase draws per sample (default 100).
    #[arg(long)]
    pub n0: Option<u64>,
    /// Estimation-phase draws per sample (default 100000).
    #[arg(long)]
    pub n: Option<u64>,
    /// Overall failure probability (default 0.001).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Base seed of the noise streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent certification runs (default 10000).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Certified model: plain smoothing or the composed ACES model.
    #[arg(long, value_enum)]
    pub fixture: Option<FixtureKind>,
    /// Entropy threshold of the ACES fixture (default 0.5).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Constant prediction of the core model (default 1).
    #[arg(long)]
    pub core_class: Option<usize>,
    /// Comma-separated weight vector of the linear classifier.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weight: Option<Vec<f64>>,
    /// Bias of the linear classifier.
    #[arg(long, allow_hyphen_values = true)]
    pub bias: Option<f64>,
    /// Softmax temperature of the linear classifier.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Comma-separated coordinates of one evaluation point; repeatable.
    #[arg(long = "point", allow_hyphen_values = true)]
    pub points: Vec<String>,
}

fn non_empty<T>(v: Vec<T>) -> Option<Vec<T>> {
    if v.is_empty() {
        None
    } else {
        Some(v)
    }
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_num).collect()
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::GenSynthetic(a) => &a.common,
            Command::Certify(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::Coverage(a) => &a.common,
        }
    }

    /// The settings given on the command line.
    fn flags(&self) -> Result<RunConfig> {
        let parallelism = self.common().parallelism;
        Ok(match self {
            Command::GenSynthetic(a) => RunConfig {
                output: a.output.clone(),
                sigma: a.sigma,
                n0: a.n0,
                n: a.n,
                seed: a.seed,
                samples: a.samples,
                dim: a.dim,
                weight: a.weight.clone(),
                bias: a.bias,
                temperature: a.temperature,
                spread: a.spread,
                label_noise: a.label_noise,
                core_error_rate: a.core_error_rate,
                parallelism,
                ..RunConfig::default()
            },
            Command::Certify(a) => RunConfig {
                input: a.input.clone(),
                output: a.output.clone(),
                alpha: a.alpha,
                theta: a.theta.clone().map(|t| vec![t]),
                rs_only: flag(a.rs_only),
                parallelism,
                ..RunConfig::default()
            },
            Command::Sweep(a) => RunConfig {
                input: a.input.clone(),
                output: a.output.clone(),
                alpha: a.alpha,
                theta: non_empty(a.theta.clone()),
                radii: non_empty(a.radii.clone()),
                strict_predict: flag(a.strict_predict),
                parallelism,
                ..RunConfig::default()
            },
            Command::Coverage(a) => RunConfig {
                output: a.output.clone(),
                sigma: a.sigma,
                n0: a.n0,
                n: a.n,
                alpha: a.alpha,
                seed: a.seed,
                trials: a.trials,
                fixture: a.fixture,
                theta: a.theta.map(|t| vec![GridItem::Value(t)]),
                core_class: a.core_class,
                weight: a.weight.clone(),
                bias: a.bias,
                temperature: a.temperature,
                points: non_empty(a.points.iter().map(|p| parse_point(p)).collect::<Result<_>>()?),
                parallelism,
                ..RunConfig::default()
            },
        })
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let flags = self.flags()?;
        match &self.common().config {
            Some(path) => Ok(flags.overlay(RunConfig::from_toml_file(path)?)),
            None => Ok(flags),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::invalid(e.to_string()))?;
    execute(&cli.command)
}

pub fn execute(command: &Command) -> Result<()> {
    let cfg = command.resolve()?;
    with_parallelism(cfg.parallelism, || match command {
        Command::GenSynthetic(_) => cmd_gen_synthetic(&cfg),
        Command::Certify(_) => cmd_certify(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
        Command::Coverage(_) => cmd_coverage(&cfg),
    })
}

/// Runs `f` on a pool of `threads` workers, or the global pool if unset.
pub fn with_parallelism<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::invalid("parallelism must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_rate(name: &str, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
    }
    Ok(v)
}

fn synthetic_point(seed: u64, index: u64, dim: usize, spread: f64) -> Vec<f64> {
    let rng = CounterRng::from_words(&[seed, index, LAYOUT_TAG]);
    (0..dim as u64).map(|j| spread * rng.gaussian_at(j)).collect()
}

/// Samples the linear classifier around synthetic points and writes a
/// dataset plus a ground-truth sidecar.
pub fn cmd_gen_synthetic(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output()?;
    let cert = cfg.certification()?;
    let clf = cfg.classifier(&[1.0, 0.0])?;
    let samples = cfg.samples.unwrap_or(100);
    let spread = cfg.spread.unwrap_or(1.0);
    if !(spread.is_finite() && spread > 0.0) {
        return Err(Error::invalid("spread must be positive"));
    }
    let label_noise = check_rate("label_noise", cfg.label_noise.unwrap_or(0.1))?;
    let core_error = check_rate("core_error_rate", cfg.core_error_rate.unwrap_or(0.05))?;
    let seed = cert.base_seed;

    let generated: Vec<(SampleRecord, Vec<f64>)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = synthetic_point(seed, i, clf.dim(), spread);
            let sampler = OraclePoint::new(&clf, &x, cert.noise, seed, i);
            let draws = collect_draws(&sampler, cert.n0, cert.n)?;
            let coins = CounterRng::from_words(&[seed, i, LABEL_TAG]);
            let clean = usize::from(clf.margin(&x)? >= 0.0);
            let label = if coins.uniform_at(0) < label_noise {
                1 - clean
            } else {
                clean
            };
            let core_prediction = if coins.uniform_at(1) < core_error {
                1 - label
            } else {
                label
            };
            let header = SampleHeader {
                sample_id: i,
                label,
                core_prediction,
            };
            Ok((SampleRecord { header, draws }, x))
        })
        .collect::<Result<_>>()?;

    let mut truth = String::from("sample_id,margin,true_smoothed_prob,true_max_radius\n");
    for (record, x) in &generated {
        let margin = clf.margin(x)?;
        let prob = true_smoothed_prob(&clf, x, cert.noise)?.get();
        let radius = clf.signed_distance(x)?.abs();
        let _ = writeln!(
            truth,
            "{},{},{},{}",
            record.header.sample_id,
            format_g17(margin),
            format_g17(prob),
            format_g17(radius)
        );
    }

    let w: Vec<_> = clf.weight().iter().map(|v| format_g17(*v)).collect();
    let dataset = Dataset {
        manifest: DatasetManifest {
            format_version: crate::store::FORMAT_VERSION,
            num_classes: 2,
            sigma: cert.noise.sigma(),
            n0: cert.n0,
            n: cert.n,
            base_seed: seed,
            num_samples: samples,
            source: format!(
                "linear-synthetic weight=[{}] bias={} temperature={} spread={} label_noise={} core_error_rate={}",
                w.join(","),
                format_g17(clf.bias()),
                format_g17(clf.temperature()),
                format_g17(spread),
                format_g17(label_noise),
                format_g17(core_error)
            ),
        },
        samples: generated.into_iter().map(|(r, _)| r).collect(),
    };
    write_dataset(&dataset, out)?;
    write_text(&out.join(GROUND_TRUTH_FILE), &truth)
}

fn single_theta(cfg: &RunConfig) -> Result<f64> {
    let thetas = cfg.thetas(&[DEFAULT_THETA])?;
    match thetas[..] {
        [t] => Ok(t),
        _ => Err(Error::invalid("certify takes a single threshold; use sweep for a grid")),
    }
}

/// Verdict rows `sample_id,branch,class,radius,p_lower_A,p_lower_S`.
pub fn cmd_certify(cfg: &RunConfig) -> Result<()> {
    cfg.distinct_paths()?;
    let dataset = read_dataset(cfg.input()?)?;
    let text = certify_table(&dataset, cfg)?;
    write_text(cfg.output()?, &text)
}

fn certify_table(dataset: &Dataset, cfg: &RunConfig) -> Result<String> {
    let alpha = cfg.alpha();
    let cert = dataset.certification_config(alpha)?;
    let m = dataset.manifest.num_classes;
    let rs_only = cfg.rs_only.unwrap_or(false);
    let theta = if rs_only { None } else { Some(single_theta(cfg)?) };

    let rows: Vec<String> = dataset
        .samples
        .par_iter()
        .map(|s| {
            let id = s.header.sample_id;
            Ok(match theta {
                None => {
                    let rs = rs_certify_draws(&s.draws, m, &cert)?;
                    match rs.verdict {
                        SmoothedVerdict::Certified { class, radius } => format!(
                            "{id},certified,{class},{},{},",
                            format_g17(radius),
                            format_g17(rs.p_lower)
                        ),
                        SmoothedVerdict::Abstain => format!("{id},abstained,,0,{},", format_g17(rs.p_lower)),
                    }
                }
                Some(theta) => {
                    let v = aces_certify(
                        &s.draws,
                        m,
                        s.header.core_prediction,
                        &cert,
                        SelectionMechanism::EntropyThreshold(theta),
                    )?;
                    let class = v.class().map_or(String::new(), |c| c.to_string());
                    format!(
                        "{id},{},{class},{},{},{}",
                        v.branch.as_str(),
                        format_g17(v.radius),
                        format_g17(v.p_lower_a),
                        format_g17(v.p_lower_s)
                    )
                }
            })
        })
        .collect::<Result<_>>()?;

    let mut out = String::from("sample_id,branch,class,radius,p_lower_A,p_lower_S\n");
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

/// Default thresholds `0, 0.1, ..., 1`.
pub fn default_thetas() -> Vec<f64> {
    expand_grid(&[GridItem::Range("0:1:0.1".into())]).expect("static range")
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    cfg.distinct_paths()?;
    let dataset = read_dataset(cfg.input()?)?;
    let thetas = cfg.thetas(&default_thetas())?;
    let table = build_sweep_table(&dataset, cfg.alpha(), &thetas, &cfg.grid()?, cfg.rule())?;
    write_text(cfg.output()?, &table.to_csv())
}

/// Default evaluation points: margins from -1.5 to 1.5 along `w`.
fn default_points(clf: &LinearSyntheticClassifier) -> Vec<Vec<f64>> {
    let norm = clf.weight_norm();
    [-1.5, -0.8, -0.3, 0.2, 0.6, 1.2]
        .iter()
        .map(|&t| {
            let shift = (t - clf.bias()) / (norm * norm);
            clf.weight().iter().map(|w| w * shift).collect()
        })
        .collect()
}

pub fn coverage_config(cfg: &RunConfig) -> Result<CoverageConfig> {
    let certification = cfg.certification()?;
    let classifier = cfg.classifier(&[0.6, 0.8])?;
    let points = cfg.points.clone().unwrap_or_else(|| default_points(&classifier));
    let fixture = match cfg.fixture.unwrap_or_default() {
        FixtureKind::Smoothing => CoverageFixture::Smoothing { classifier, points },
        FixtureKind::Aces => CoverageFixture::Aces {
            classifier,
            core_class: cfg.core_class.unwrap_or(1),
            theta: single_theta(cfg)?,
            points,
        },
    };
    Ok(CoverageConfig {
        fixture,
        certification,
        trials: cfg.trials.unwrap_or(10_000),
    })
}

pub fn cmd_coverage(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output()?;
    let report = run_coverage_experiment(&coverage_config(cfg)?)?;
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Invariant(format!("report serialization failed: {e}")))?;
    json.push('\n');
    write_text(out, &json)
}
