//! Versioned JSON evaluation report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matcher::MatchSummary;
use super::metrics::{AccuracyReport, ErrorDistribution};

pub const REPORT_SCHEMA: &str = "symgen.evaluation.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema: String,
    #[serde(rename = "match")]
    pub match_summary: Option<MatchSummary>,
    pub symmetry: Option<AccuracyReport>,
    pub property_errors: Option<ErrorDistribution>,
    pub composition_precision: Option<f64>,
}

impl Default for EvaluationReport {
    fn default() -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            match_summary: None,
            symmetry: None,
            property_errors: None,
            composition_precision: None,
        }
    }
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    /// Plain-text summary table.
    pub fn to_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}%"));
        let mut rows: Vec<(String, String)> = Vec::new();
        if let Some(m) = &self.match_summary {
            rows.push(("match rate".into(), pct(Some(m.rate))));
            rows.push(("mean RMSE".into(), m.mean_rmse.map_or("-".into(), |r| format!("{r:.4}"))));
        }
        if let Some(s) = &self.symmetry {
            rows.push(("space group accuracy".into(), pct(Some(s.space_group_accuracy))));
            rows.push(("Wyckoff accuracy".into(), pct(Some(s.wyckoff_accuracy))));
        }
        if let Some(d) = &self.property_errors {
            for (b, p) in d.bars.iter().zip(&d.probabilities) {
                rows.push((format!("P(|err| < {b})"), pct(Some(*p))));
            }
        }
        if self.composition_precision.is_some() {
            rows.push(("composition precision".into(), pct(self.composition_precision)));
        }
        let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }
}
