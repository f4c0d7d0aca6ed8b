use std::fmt::Write;

use crate::aces::{predict_sweep, sweep_thresholds, AcesVerdict, CoreBranchRule};
use crate::error::{Error, Result};
use crate::oracle::DrawRecord;
use crate::smoothing::PredictVerdict;
use crate::store::{format_g17, Dataset};

use super::metrics::{
    average_certified_radius, certified_accuracy_at, certified_selection_rate_at, natural_accuracy, RadiusGrid,
};

/// Metrics of one selection threshold. Fractions lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationRow {
    pub theta: f64,
    pub nac: f64,
    pub acr: f64,
    /// One entry per grid radius.
    pub certified_accuracy: Vec<f64>,
    /// One entry per grid radius.
    pub selection_rate: Vec<f64>,
}

impl EvaluationRow {
    pub fn from_verdicts(
        theta: f64,
        predictions: &[PredictVerdict],
        certificates: &[AcesVerdict],
        labels: &[usize],
        grid: &RadiusGrid,
    ) -> Result<Self> {
        Ok(EvaluationRow {
            theta,
            nac: natural_accuracy(predictions, labels)?,
            acr: average_certified_radius(certificates, labels)?,
            certified_accuracy: certified_accuracy_at(certificates, labels, grid)?,
            selection_rate: certified_selection_rate_at(certificates, grid)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub grid: RadiusGrid,
    pub rows: Vec<EvaluationRow>,
}

fn radius_label(r: f64) -> String {
    let two = format!("{r:.2}");
    if two.parse::<f64>() == Ok(r) {
        two
    } else {
        format!("{r}")
    }
}

fn percent(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

impl SweepTable {
    /// Column names: `theta, nac, acr, ca_<r>..., sr_<r>...` rounded for
    /// reading, then the same quantities at full precision with a `_raw`
    /// suffix.
    pub fn header(&self) -> Vec<String> {
        let labels: Vec<_> = self.grid.radii().iter().map(|&r| radius_label(r)).collect();
        let mut cols = vec!["theta".to_string(), "nac".into(), "acr".into()];
        cols.extend(labels.iter().map(|r| format!("ca_{r}")));
        cols.extend(labels.iter().map(|r| format!("sr_{r}")));
        cols.extend(["nac_raw".to_string(), "acr_raw".into()]);
        cols.extend(labels.iter().map(|r| format!("ca_raw_{r}")));
        cols.extend(labels.iter().map(|r| format!("sr_raw_{r}")));
        cols
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![format!("{}", row.theta), percent(row.nac), format!("{:.3}", row.acr)];
            cells.extend(row.certified_accuracy.iter().map(|&x| percent(x)));
            cells.extend(row.selection_rate.iter().map(|&x| percent(x)));
            cells.extend([format_g17(row.nac), format_g17(row.acr)]);
            cells.extend(row.certified_accuracy.iter().map(|&x| format_g17(x)));
            cells.extend(row.selection_rate.iter().map(|&x| format_g17(x)));
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Evaluates every threshold on a recorded dataset.
///
/// Certificates come from both recorded phases; natural accuracy comes from
/// the prediction procedure run on the estimation-phase draws.
pub fn build_sweep_table(
    dataset: &Dataset,
    alpha: f64,
    thetas: &[f64],
    grid: &RadiusGrid,
    rule: CoreBranchRule,
) -> Result<SweepTable> {
    if dataset.samples.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    let cfg = dataset.certification_config(alpha)?;
    let m = dataset.manifest.num_classes;
    let labels = dataset.labels();
    let cores = dataset.core_predictions();
    let draws: Vec<_> = dataset.samples.iter().map(|s| s.draws.clone()).collect();
    let certified = sweep_thresholds(&draws, &cores, m, &cfg, thetas)?;
    let phase1: Vec<&[DrawRecord]> = dataset.samples.iter().map(|s| s.draws.phase1.as_slice()).collect();
    let predicted = predict_sweep(&phase1, &cores, m, alpha, thetas, rule)?;

    let rows = thetas
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            let cert: Vec<_> = certified.iter().map(|row| row[j]).collect();
            let pred: Vec<_> = predicted.iter().map(|row| row[j]).collect();
            EvaluationRow::from_verdicts(theta, &pred, &cert, &labels, grid)
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        grid: grid.clone(),
        rows,
    })
}
