//! Evaluation quantities, threshold-sweep tables, and empirical coverage
//! experiments.

mod coverage;
mod metrics;
mod table;

pub use coverage::{run_coverage_experiment, AcesGroundTruth, CoverageConfig, CoverageFixture, CoverageReport};
pub use metrics::{
    average_certified_radius, certified_accuracy_at, certified_selection_rate_at, natural_accuracy, CertifiedOutcome,
    RadiusGrid,
};
pub use table::{build_sweep_table, EvaluationRow, SweepTable};
