//! Symmetry accuracy, property-error distributions, composition precision
//! and the energy arithmetic behind the property labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constraint::Composition;
use crate::error::EvalError;
use crate::symmetry::{letter_rank, CrystalStructure, SiteAssignment, SpaceGroupId};

pub const OTHER: &str = "other";
pub const SPACE_GROUP_RARE_THRESHOLD: usize = 500;
pub const WYCKOFF_RARE_THRESHOLD: usize = 50;
pub const DEFAULT_BARS: [f64; 2] = [0.01, 0.05];

/// Same (element, letter) multiset, ignoring order.
pub fn wyckoff_multiset_equal(a: &[SiteAssignment], b: &[SiteAssignment]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort();
    y.sort();
    x == y
}

/// Maps labels seen fewer than `threshold` times to `"other"`.
pub fn aggregate_rare_labels(counts: &BTreeMap<String, usize>, threshold: usize) -> BTreeMap<String, String> {
    counts.iter().map(|(k, n)| (k.clone(), if *n < threshold { OTHER.to_string() } else { k.clone() })).collect()
}

/// Rows are gold labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    fn build(
        pairs: &[(String, String)],
        gold_counts: &BTreeMap<String, usize>,
        threshold: usize,
        order: impl Fn(&str) -> u64,
    ) -> Self {
        let map = aggregate_rare_labels(gold_counts, threshold);
        let label = |l: &str| map.get(l).cloned().unwrap_or_else(|| OTHER.to_string());
        let mut labels: Vec<String> = map.values().filter(|l| *l != OTHER).cloned().collect();
        labels.sort_by_key(|l| order(l));
        labels.dedup();
        labels.push(OTHER.to_string());
        let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut counts = vec![vec![0; labels.len()]; labels.len()];
        for (g, p) in pairs {
            counts[index[label(g).as_str()]][index[label(p).as_str()]] += 1;
        }
        Self { labels, counts }
    }

    pub fn row_total(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    /// Diagonal over row total per label with at least one sample.
    pub fn per_class_accuracy(&self) -> Vec<(String, f64)> {
        (0..self.labels.len())
            .filter(|i| self.row_total(*i) > 0)
            .map(|i| (self.labels[i].clone(), 100.0 * self.counts[i][i] as f64 / self.row_total(i) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Percent of exact space-group matches.
    pub space_group_accuracy: f64,
    /// Percent of Wyckoff multiset matches.
    pub wyckoff_accuracy: f64,
    pub space_group_confusion: Confusion,
    /// Per-orbit letters, aligned after sorting; unequal lists are padded
    /// with `"other"`.
    pub wyckoff_confusion: Confusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RareThresholds {
    pub space_group: usize,
    pub wyckoff: usize,
}

impl Default for RareThresholds {
    fn default() -> Self {
        Self { space_group: SPACE_GROUP_RARE_THRESHOLD, wyckoff: WYCKOFF_RARE_THRESHOLD }
    }
}

pub type SymmetryLabel = (SpaceGroupId, Vec<SiteAssignment>);

pub fn symmetry_accuracy(
    pred: &[SymmetryLabel],
    gold: &[SymmetryLabel],
    thresholds: RareThresholds,
) -> Result<AccuracyReport, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch(pred.len(), gold.len()));
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = gold.len() as f64;
    let sg_hits = pred.iter().zip(gold).filter(|(p, g)| p.0 == g.0).count();
    let wy_hits = pred.iter().zip(gold).filter(|(p, g)| wyckoff_multiset_equal(&p.1, &g.1)).count();

    let mut sg_counts = BTreeMap::new();
    for g in gold {
        *sg_counts.entry(g.0.index().to_string()).or_insert(0) += 1;
    }
    let sg_pairs: Vec<(String, String)> =
        gold.iter().zip(pred).map(|(g, p)| (g.0.index().to_string(), p.0.index().to_string())).collect();
    let sg_conf = Confusion::build(&sg_pairs, &sg_counts, thresholds.space_group, |l| l.parse().unwrap_or(u64::MAX));

    let mut wy_pairs = Vec::new();
    let mut wy_counts = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        let mut gs = g.1.clone();
        let mut ps = p.1.clone();
        gs.sort();
        ps.sort();
        for i in 0..gs.len().max(ps.len()) {
            let gl = gs.get(i).map_or(OTHER.to_string(), |a| a.letter.to_string());
            let pl = ps.get(i).map_or(OTHER.to_string(), |a| a.letter.to_string());
            if gl != OTHER {
                *wy_counts.entry(gl.clone()).or_insert(0) += 1;
            }
            wy_pairs.push((gl, pl));
        }
    }
    let wy_conf = Confusion::build(&wy_pairs, &wy_counts, thresholds.wyckoff, |l| {
        l.chars().next().map_or(u64::MAX, |c| letter_rank(c) as u64)
    });
    Ok(AccuracyReport {
        space_group_accuracy: 100.0 * sg_hits as f64 / n,
        wyckoff_accuracy: 100.0 * wy_hits as f64 / n,
        space_group_confusion: sg_conf,
        wyckoff_confusion: wy_conf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub bars: Vec<f64>,
    /// Percent of absolute errors strictly below each bar.
    pub probabilities: Vec<f64>,
    pub composition_precision: Option<f64>,
}

pub fn property_error_distribution(pred: &[f64], target: &[f64], bars: &[f64]) -> Result<ErrorDistribution, EvalError> {
    if pred.len() != target.len() {
        return Err(EvalError::LengthMismatch(pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    if !bars.windows(2).all(|w| w[0] < w[1]) || bars.iter().any(|b| !b.is_finite()) {
        return Err(EvalError::InvalidInput("bars must be finite and strictly increasing".into()));
    }
    let errs: Vec<f64> = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).collect();
    let probabilities =
        bars.iter().map(|b| 100.0 * errs.iter().filter(|e| **e < *b).count() as f64 / errs.len() as f64).collect();
    Ok(ErrorDistribution { bars: bars.to_vec(), probabilities, composition_precision: None })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reduced(counts: BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    let g = counts.values().fold(0, |g, v| gcd(g, *v)).max(1);
    counts.into_iter().map(|(k, v)| (k, v / g)).collect()
}

/// Whether a structure realises a requested composition: same element set
/// for element requests, same gcd-reduced formula for formula requests.
pub fn composition_matches(s: &CrystalStructure, req: &Composition) -> bool {
    let comp: BTreeMap<String, u64> = s.composition().into_iter().map(|(k, v)| (k, v as u64)).collect();
    match req {
        Composition::Elements(e) => {
            let mut want: Vec<&String> = e.iter().collect();
            want.sort();
            want.dedup();
            comp.keys().collect::<Vec<_>>() == want
        }
        Composition::Formula(f) => {
            let mut want = BTreeMap::new();
            for (e, n) in f {
                *want.entry(e.clone()).or_insert(0) += *n as u64;
            }
            reduced(comp) == reduced(want)
        }
    }
}

pub fn composition_precision(generated: &[CrystalStructure], requested: &[Composition]) -> Result<f64, EvalError> {
    if generated.len() != requested.len() {
        return Err(EvalError::LengthMismatch(generated.len(), requested.len()));
    }
    if generated.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = generated.iter().zip(requested).filter(|(s, r)| composition_matches(s, r)).count();
    Ok(100.0 * hits as f64 / generated.len() as f64)
}

/// Formation energy per atom from a total energy and elemental references.
pub fn formation_energy(
    total: f64,
    element_energies: &BTreeMap<String, f64>,
    counts: &BTreeMap<String, u64>,
) -> Result<f64, EvalError> {
    if counts.is_empty() || counts.values().any(|n| *n == 0) {
        return Err(EvalError::InvalidInput("counts must be positive".into()));
    }
    if !total.is_finite() {
        return Err(EvalError::InvalidInput("total energy is not finite".into()));
    }
    let mut reference = 0.0;
    for (e, n) in counts {
        let ee = element_energies.get(e).ok_or_else(|| EvalError::MissingElementEnergy(e.clone()))?;
        reference += *n as f64 * ee;
    }
    let atoms: u64 = counts.values().sum();
    Ok((total - reference) / atoms as f64)
}

/// Gap between band edges, zero when they overlap.
pub fn band_gap(vbm: f64, cbm: f64) -> Result<f64, EvalError> {
    if !vbm.is_finite() || !cbm.is_finite() {
        return Err(EvalError::InvalidInput("band edges must be finite".into()));
    }
    Ok((cbm - vbm).max(0.0))
}
