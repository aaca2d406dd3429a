//! Corpus filtering and leak-free train/validation/test splits.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::StructureRecord;
use crate::error::DataError;
use crate::property::E_ABOVE_HULL_KEY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Records need strictly fewer atoms than this.
    pub max_atoms: usize,
    /// Inclusive bound on energy above hull, eV/atom.
    pub max_e_hull: f64,
    /// Missing energy above hull is an error rather than a skip.
    pub strict: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { max_atoms: 20, max_e_hull: 0.1, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<StructureRecord>,
    pub dropped: usize,
    /// Records skipped for lacking energy above hull.
    pub missing: usize,
}

pub fn filter_corpus(records: Vec<StructureRecord>, config: &FilterConfig) -> Result<FilterOutcome, DataError> {
    let mut kept = Vec::new();
    let (mut dropped, mut missing) = (0, 0);
    for r in records {
        let Some(e_hull) = r.property(E_ABOVE_HULL_KEY) else {
            if config.strict {
                return Err(DataError::MissingField { id: r.id, field: E_ABOVE_HULL_KEY.into() });
            }
            missing += 1;
            dropped += 1;
            continue;
        };
        if r.num_atoms() < config.max_atoms && e_hull <= config.max_e_hull {
            kept.push(r);
        } else {
            dropped += 1;
        }
    }
    Ok(FilterOutcome { kept, dropped, missing })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Alphabetical gcd-reduced formula, e.g. `ClNa` for Na4Cl4.
pub fn reduced_formula(record: &StructureRecord) -> String {
    let comp = record.structure.composition();
    let g = comp.values().fold(0, |g, v| gcd(g, *v)).max(1);
    comp.iter().map(|(e, n)| if n / g == 1 { e.clone() } else { format!("{e}{}", n / g) }).collect()
}

/// Records sharing this key are treated as the same crystal.
pub fn group_key(record: &StructureRecord) -> String {
    format!("{}|{}", reduced_formula(record), record.space_group)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self).expect("split serialises");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| DataError::Malformed {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

/// 80/10/10 split over shuffled groups of identical crystals.
pub fn split_dataset(records: &[StructureRecord], seed: u64) -> DatasetSplit {
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let k = group_key(r);
        let i = *index.entry(k).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[i].push(r.id.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let n = groups.len();
    let n_train = (0.8 * n as f64).round() as usize;
    let n_val = ((0.1 * n as f64).round() as usize).min(n - n_train);
    let flat = |g: &[Vec<String>]| g.iter().flatten().cloned().collect::<Vec<_>>();
    DatasetSplit {
        seed,
        train: flat(&groups[..n_train]),
        validation: flat(&groups[n_train..n_train + n_val]),
        test: flat(&groups[n_train + n_val..]),
    }
}
