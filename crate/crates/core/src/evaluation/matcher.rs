//! Periodic structure matching under length, angle and site tolerances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use crate::error::EvalError;
use crate::par::Execution;
use crate::symmetry::{CrystalStructure, LatticeMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchSettings {
    /// Relative length tolerance.
    pub ltol: f64,
    /// Site tolerance, in units of (V/N)^(1/3).
    pub stol: f64,
    /// Angle tolerance in degrees.
    pub angle_tol: f64,
}

impl Default for MatchSettings {
    fn default() -> Self {
        Self { ltol: 0.3, stol: 0.5, angle_tol: 10.0 }
    }
}

impl MatchSettings {
    pub fn validate(&self) -> Result<(), EvalError> {
        if [self.ltol, self.stol, self.angle_tol].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(EvalError::InvalidInput(format!("match tolerances must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub matched: bool,
    /// Site RMS distance over (V/N)^(1/3); present iff matched.
    pub rmse_normalized: Option<f64>,
}

impl MatchReport {
    pub const UNMATCHED: MatchReport = MatchReport { matched: false, rmse_normalized: None };
}

/// Squared minimum-image distance between fractional points.
pub fn min_image_sq(m: &LatticeMatrix, a: [f64; 3], b: [f64; 3]) -> f64 {
    let d: [f64; 3] = [0, 1, 2].map(|k| {
        let x = b[k] - a[k];
        x - x.round()
    });
    let mut best = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                let c = m.to_cartesian([d[0] + i as f64, d[1] + j as f64, d[2] + k as f64]);
                best = best.min(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
            }
        }
    }
    best
}

fn sorted3(mut v: [f64; 3]) -> [f64; 3] {
    v.sort_by(f64::total_cmp);
    v
}

/// Whether the cells agree under `ltol` and `angle_tol`.
pub fn lattices_compatible(s1: &CrystalStructure, s2: &CrystalStructure, settings: &MatchSettings) -> bool {
    let (p1, p2) = (s1.parameters(), s2.parameters());
    let (l1, l2) = (sorted3(p1.lengths()), sorted3(p2.lengths()));
    let (a1, a2) = (sorted3(p1.angles()), sorted3(p2.angles()));
    (0..3).all(|k| l1[k].max(l2[k]) / l1[k].min(l2[k]) <= 1.0 + settings.ltol)
        && (0..3).all(|k| (a1[k] - a2[k]).abs() <= settings.angle_tol)
}

fn species_groups(s: &CrystalStructure) -> BTreeMap<&str, Vec<usize>> {
    let mut g: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in s.species.iter().enumerate() {
        g.entry(e.as_str()).or_default().push(i);
    }
    g
}

/// Shared frame for distances: the mean of both cells in standard orientation.
pub fn comparison_lattice(s1: &CrystalStructure, s2: &CrystalStructure) -> LatticeMatrix {
    let (m1, m2) = (s1.parameters().to_matrix(), s2.parameters().to_matrix());
    let mut rows = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            rows[i][k] = 0.5 * (m1.rows[i][k] + m2.rows[i][k]);
        }
    }
    LatticeMatrix { rows }
}

/// Candidate translations: every pairing of a site of the rarest species in
/// `s1` with a same-species site of `s2`.
pub fn anchor_translations(s1: &CrystalStructure, s2: &CrystalStructure) -> Vec<[f64; 3]> {
    let (g1, g2) = (species_groups(s1), species_groups(s2));
    let Some((sp, idx1)) = g1.iter().min_by_key(|(sp, v)| (v.len(), **sp)) else {
        return Vec::new();
    };
    let idx2 = &g2[sp];
    let mut out = Vec::with_capacity(idx1.len() * idx2.len());
    for &i in idx1 {
        for &j in idx2 {
            out.push([0, 1, 2].map(|k| s2.frac_coords[j][k] - s1.frac_coords[i][k]));
        }
    }
    out
}

/// Best species-respecting assignment cost (sum of squared distances) for
/// one translation, with the assignment per species.
pub fn assignment_for_translation(
    s1: &CrystalStructure,
    s2: &CrystalStructure,
    m: &LatticeMatrix,
    t: [f64; 3],
) -> (f64, BTreeMap<String, Vec<usize>>) {
    let (g1, g2) = (species_groups(s1), species_groups(s2));
    let mut total = 0.0;
    let mut picks = BTreeMap::new();
    for (sp, idx1) in &g1 {
        let idx2 = &g2[sp];
        let cost: Vec<Vec<f64>> = idx1
            .iter()
            .map(|&i| {
                let x = [0, 1, 2].map(|k| s1.frac_coords[i][k] + t[k]);
                idx2.iter().map(|&j| min_image_sq(m, x, s2.frac_coords[j])).collect()
            })
            .collect();
        let a = hungarian(&cost);
        total += a.iter().enumerate().map(|(r, c)| cost[r][*c]).sum::<f64>();
        picks.insert(sp.to_string(), a.iter().map(|c| idx2[*c]).collect());
    }
    (total, picks)
}

pub fn same_composition(s1: &CrystalStructure, s2: &CrystalStructure) -> bool {
    let mut a = s1.species.clone();
    let mut b = s2.species.clone();
    a.sort();
    b.sort();
    a == b
}

/// Normalised RMS site distance of the best anchor alignment, ignoring the
/// tolerances. `None` when compositions differ.
pub fn best_normalized_rms(s1: &CrystalStructure, s2: &CrystalStructure) -> Option<f64> {
    if !same_composition(s1, s2) {
        return None;
    }
    let m = comparison_lattice(s1, s2);
    let n = s1.species.len() as f64;
    let norm = (m.volume() / n).cbrt();
    anchor_translations(s1, s2)
        .into_iter()
        .map(|t| assignment_for_translation(s1, s2, &m, t).0)
        .min_by(f64::total_cmp)
        .map(|sq| (sq / n).sqrt() / norm)
}

pub fn match_structures(s1: &CrystalStructure, s2: &CrystalStructure, settings: &MatchSettings) -> MatchReport {
    if !same_composition(s1, s2) || !lattices_compatible(s1, s2, settings) {
        return MatchReport::UNMATCHED;
    }
    match best_normalized_rms(s1, s2) {
        Some(r) if r <= settings.stol => MatchReport { matched: true, rmse_normalized: Some(r) },
        _ => MatchReport::UNMATCHED,
    }
}

/// Matches pairs in input order.
pub fn match_batch(
    pairs: &[(CrystalStructure, CrystalStructure)],
    settings: &MatchSettings,
    exec: Execution,
) -> Vec<MatchReport> {
    exec.map_indexed(pairs, |_, (a, b)| match_structures(a, b, settings))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    /// Percent of pairs matched.
    pub rate: f64,
    /// Mean normalised RMSE over matched pairs.
    pub mean_rmse: Option<f64>,
}

pub fn match_rate(reports: &[MatchReport]) -> Result<MatchSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let rmses: Vec<f64> = reports.iter().filter_map(|r| r.rmse_normalized.filter(|_| r.matched)).collect();
    let matched = reports.iter().filter(|r| r.matched).count();
    Ok(MatchSummary {
        rate: 100.0 * matched as f64 / reports.len() as f64,
        mean_rmse: (!rmses.is_empty()).then(|| rmses.iter().sum::<f64>() / rmses.len() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::LatticeParameters;

    fn structure(species: &[&str], coords: Vec<[f64; 3]>, p: LatticeParameters) -> CrystalStructure {
        CrystalStructure::new(species.iter().map(|s| s.to_string()).collect(), coords, p.to_matrix()).unwrap()
    }

    fn sample() -> CrystalStructure {
        structure(
            &["Ti", "O", "O"],
            vec![[0.0, 0.0, 0.0], [0.3, 0.3, 0.0], [0.7, 0.7, 0.0]],
            LatticeParameters::new(4.6, 4.6, 3.0, 90.0, 90.0, 90.0).unwrap(),
        )
    }

    #[test]
    fn identity_and_translation() {
        let s = sample();
        let r = match_structures(&s, &s, &MatchSettings::default());
        assert!(r.matched);
        assert!(r.rmse_normalized.unwrap() < 1e-12);
        let mut t = s.clone();
        for x in &mut t.frac_coords {
            *x = [0, 1, 2].map(|k| (x[k] + 0.25).rem_euclid(1.0));
        }
        let r = match_structures(&s, &t, &MatchSettings::default());
        assert!(r.matched && r.rmse_normalized.unwrap() < 1e-12);
    }

    #[test]
    fn scaled_lattice_fails() {
        let s = sample();
        let p = s.parameters();
        let big = structure(
            &["Ti", "O", "O"],
            s.frac_coords.clone(),
            LatticeParameters::new(p.a * 1.5, p.b * 1.5, p.c * 1.5, 90.0, 90.0, 90.0).unwrap(),
        );
        assert!(!match_structures(&s, &big, &MatchSettings::default()).matched);
    }

    #[test]
    fn composition_mismatch() {
        let s = sample();
        let mut t = s.clone();
        t.species[1] = "N".into();
        assert_eq!(match_structures(&s, &t, &MatchSettings::default()), MatchReport::UNMATCHED);
    }

    #[test]
    fn rates() {
        let m = MatchReport { matched: true, rmse_normalized: Some(0.1) };
        let u = MatchReport::UNMATCHED;
        let r = match_rate(&[m, m, u, u]).unwrap();
        assert_eq!(r.rate, 50.0);
        assert!((r.mean_rmse.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(match_rate(&[u]).unwrap().mean_rmse, None);
        assert_eq!(match_rate(&[]), Err(EvalError::Empty));
    }
}
