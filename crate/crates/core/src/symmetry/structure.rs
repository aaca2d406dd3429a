use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::group::{crystal_system_of, SpaceGroupId};
use super::lattice::{satisfies_class, LatticeMatrix, LatticeParameters, CLASS_TOL};
use super::wyckoff::{wrap3, WyckoffTable};
use crate::elements;
use crate::error::SymmetryError;

/// A periodic crystal: species, fractional coordinates and cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalStructure {
    pub species: Vec<String>,
    pub frac_coords: Vec<[f64; 3]>,
    pub lattice: LatticeMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wyckoff_letters: Option<Vec<char>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, f64>,
}

impl CrystalStructure {
    /// Builds a structure, wrapping coordinates into `[0, 1)`.
    pub fn new(
        species: Vec<String>,
        frac_coords: Vec<[f64; 3]>,
        lattice: LatticeMatrix,
    ) -> Result<Self, SymmetryError> {
        let s = Self {
            species,
            frac_coords: frac_coords.into_iter().map(wrap3).collect(),
            lattice,
            wyckoff_letters: None,
            properties: BTreeMap::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_letters(mut self, letters: Vec<char>) -> Result<Self, SymmetryError> {
        if letters.len() != self.species.len() {
            return Err(SymmetryError::InvalidStructure(format!(
                "{} Wyckoff letters for {} sites",
                letters.len(),
                self.species.len()
            )));
        }
        self.wyckoff_letters = Some(letters);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SymmetryError> {
        let n = self.species.len();
        if n == 0 {
            return Err(SymmetryError::InvalidStructure("structure has no sites".into()));
        }
        if self.frac_coords.len() != n {
            return Err(SymmetryError::InvalidStructure(format!(
                "{} species but {} coordinates",
                n,
                self.frac_coords.len()
            )));
        }
        if let Some(l) = &self.wyckoff_letters {
            if l.len() != n {
                return Err(SymmetryError::InvalidStructure(format!("{} Wyckoff letters for {n} sites", l.len())));
            }
        }
        for s in &self.species {
            if !elements::is_element(s) {
                return Err(SymmetryError::UnknownSpecies(s.clone()));
            }
        }
        for c in &self.frac_coords {
            if !c.iter().all(|x| x.is_finite() && (0.0..1.0).contains(x)) {
                return Err(SymmetryError::InvalidStructure(format!("coordinate {c:?} outside [0, 1)")));
            }
        }
        let det = self.lattice.determinant();
        if !(det > 0.0) {
            return Err(SymmetryError::DegenerateLattice(det));
        }
        Ok(())
    }

    pub fn num_sites(&self) -> usize {
        self.species.len()
    }

    pub fn volume(&self) -> f64 {
        self.lattice.volume()
    }

    pub fn parameters(&self) -> LatticeParameters {
        self.lattice.to_parameters()
    }

    /// Element → site count.
    pub fn composition(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for s in &self.species {
            *m.entry(s.clone()).or_insert(0) += 1;
        }
        m
    }
}

/// Element placed on a Wyckoff position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteAssignment {
    pub element: String,
    pub letter: char,
}

impl SiteAssignment {
    pub fn new(element: impl Into<String>, letter: char) -> Self {
        Self { element: element.into(), letter }
    }
}

/// Space group plus the Wyckoff assignment of every orbit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryConstraint {
    pub space_group: SpaceGroupId,
    pub assignments: Vec<SiteAssignment>,
}

impl SymmetryConstraint {
    pub fn new(space_group: SpaceGroupId, assignments: Vec<SiteAssignment>) -> Result<Self, SymmetryError> {
        let c = Self { space_group, assignments };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SymmetryError> {
        if self.assignments.is_empty() {
            return Err(SymmetryError::ConstraintViolation("no Wyckoff assignments".into()));
        }
        let table = WyckoffTable::global();
        for a in &self.assignments {
            if !elements::is_element(&a.element) {
                return Err(SymmetryError::UnknownSpecies(a.element.clone()));
            }
            table.position(self.space_group, a.letter)?;
        }
        Ok(())
    }

    /// Total sites after orbit expansion.
    pub fn num_sites(&self) -> usize {
        let table = WyckoffTable::global();
        self.assignments
            .iter()
            .map(|a| table.position(self.space_group, a.letter).map(|w| w.multiplicity).unwrap_or(0))
            .sum()
    }

    /// Per-site species in expansion order.
    pub fn expanded_species(&self) -> Vec<String> {
        let table = WyckoffTable::global();
        let mut out = Vec::new();
        for a in &self.assignments {
            let m = table.position(self.space_group, a.letter).map(|w| w.multiplicity).unwrap_or(0);
            out.extend(std::iter::repeat(a.element.clone()).take(m));
        }
        out
    }

    /// Per-site letters in expansion order.
    pub fn expanded_letters(&self) -> Vec<char> {
        let table = WyckoffTable::global();
        let mut out = Vec::new();
        for a in &self.assignments {
            let m = table.position(self.space_group, a.letter).map(|w| w.multiplicity).unwrap_or(0);
            out.extend(std::iter::repeat(a.letter).take(m));
        }
        out
    }

    pub fn element_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for s in self.expanded_species() {
            *m.entry(s).or_insert(0) += 1;
        }
        m
    }
}

/// Expands every assignment's orbit on the given cell. Species are ordered by
/// assignment, then by orbit index.
pub fn realize_structure(
    constraint: &SymmetryConstraint,
    lattice: &LatticeParameters,
    free_params: &[[f64; 3]],
) -> Result<CrystalStructure, SymmetryError> {
    constraint.validate()?;
    if free_params.len() != constraint.assignments.len() {
        return Err(SymmetryError::ConstraintViolation(format!(
            "{} free-parameter triples for {} assignments",
            free_params.len(),
            constraint.assignments.len()
        )));
    }
    lattice.validate()?;
    let system = crystal_system_of(constraint.space_group);
    if !satisfies_class(lattice, system, CLASS_TOL) {
        return Err(SymmetryError::ConstraintViolation(format!(
            "lattice {lattice:?} violates the {system:?} class of space group {}",
            constraint.space_group
        )));
    }
    let table = WyckoffTable::global();
    let mut species = Vec::new();
    let mut coords = Vec::new();
    let mut letters = Vec::new();
    for (a, p) in constraint.assignments.iter().zip(free_params) {
        let w = table.position(constraint.space_group, a.letter)?;
        for pt in w.orbit(*p)? {
            species.push(a.element.clone());
            coords.push(pt);
            letters.push(a.letter);
        }
    }
    CrystalStructure::new(species, coords, lattice.to_matrix())?.with_letters(letters)
}
