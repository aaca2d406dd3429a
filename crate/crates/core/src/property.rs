use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Target material property a model or prompt is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    /// eV
    BandGap,
    /// eV/atom
    FormationEnergy,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 2] = [PropertyKind::BandGap, PropertyKind::FormationEnergy];

    pub fn unit(self) -> &'static str {
        match self {
            PropertyKind::BandGap => "eV",
            PropertyKind::FormationEnergy => "eV/atom",
        }
    }

    /// Key used in record property maps.
    pub fn key(self) -> &'static str {
        match self {
            PropertyKind::BandGap => "band_gap",
            PropertyKind::FormationEnergy => "formation_energy",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PropertyKind::BandGap => "band gap",
            PropertyKind::FormationEnergy => "formation energy",
        }
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for PropertyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "band_gap" | "band-gap" | "bandgap" => Ok(PropertyKind::BandGap),
            "formation_energy" | "formation-energy" => Ok(PropertyKind::FormationEnergy),
            other => Err(format!("unknown property kind {other:?}")),
        }
    }
}

/// A property value of a given kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyTarget {
    pub kind: PropertyKind,
    pub value: f64,
}

impl PropertyTarget {
    pub fn new(kind: PropertyKind, value: f64) -> Self {
        Self { kind, value }
    }
}

/// Record key for energy above the convex hull (eV/atom).
pub const E_ABOVE_HULL_KEY: &str = "energy_above_hull";
