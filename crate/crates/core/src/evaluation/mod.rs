//! Structure matching and the symmetry, property and composition metrics.

pub mod hungarian;
pub mod matcher;
pub mod metrics;
pub mod report;

pub use hungarian::hungarian;
pub use matcher::{match_batch, match_rate, match_structures, MatchReport, MatchSettings, MatchSummary};
pub use metrics::{
    aggregate_rare_labels, band_gap, composition_matches, composition_precision, formation_energy,
    property_error_distribution, symmetry_accuracy, wyckoff_multiset_equal, AccuracyReport, Confusion,
    ErrorDistribution, RareThresholds, DEFAULT_BARS,
};
pub use report::{EvaluationReport, REPORT_SCHEMA};
