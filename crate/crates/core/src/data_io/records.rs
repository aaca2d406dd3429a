//! The `structures.v1` JSON-lines document.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::TrainingRecord;
use crate::error::DataError;
use crate::property::PropertyKind;
use crate::symmetry::{
    crystal_system_of, periodic_max_distance, satisfies_class, CrystalStructure, LatticeMatrix, LatticeParameters,
    SiteAssignment, SpaceGroupId, SymmetryConstraint, WyckoffTable,
};

/// Tolerance for strict symmetry checks on load.
pub const STRICT_TOL: f64 = 1e-6;

/// A structure with its symmetry labels and properties. Sites are stored
/// orbit by orbit in assignment order.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureRecord {
    pub id: String,
    pub structure: CrystalStructure,
    pub space_group: SpaceGroupId,
    pub assignments: Vec<SiteAssignment>,
    pub properties: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LatticeDoc {
    /// Authoritative.
    matrix: [[f64; 3]; 3],
    #[serde(default, skip_deserializing)]
    parameters: Option<LatticeParameters>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordDoc {
    id: String,
    space_group: i64,
    lattice: LatticeDoc,
    species: Vec<String>,
    frac_coords: Vec<[f64; 3]>,
    assignments: Vec<SiteAssignment>,
    #[serde(default)]
    properties: BTreeMap<String, f64>,
}

impl StructureRecord {
    /// Builds a record, attaching per-site letters from the assignments.
    pub fn new(
        id: impl Into<String>,
        structure: CrystalStructure,
        space_group: SpaceGroupId,
        assignments: Vec<SiteAssignment>,
        properties: BTreeMap<String, f64>,
    ) -> Result<Self, DataError> {
        let id = id.into();
        let constraint = SymmetryConstraint { space_group, assignments: assignments.clone() };
        let invalid = |msg: String| DataError::Invalid { id: id.clone(), msg };
        constraint.validate().map_err(|e| invalid(e.to_string()))?;
        let letters = constraint.expanded_letters();
        let structure = if letters.len() == structure.species.len() {
            structure.with_letters(letters).map_err(|e| invalid(e.to_string()))?
        } else {
            structure
        };
        Ok(Self { id, structure, space_group, assignments, properties })
    }

    pub fn constraint(&self) -> SymmetryConstraint {
        SymmetryConstraint { space_group: self.space_group, assignments: self.assignments.clone() }
    }

    pub fn num_atoms(&self) -> usize {
        self.structure.species.len()
    }

    pub fn property(&self, key: &str) -> Option<f64> {
        self.properties.get(key).copied()
    }

    /// Checks species order, lattice class and orbit consistency to `tol`.
    pub fn check_symmetry(&self, tol: f64) -> Result<(), DataError> {
        let invalid = |msg: String| DataError::Invalid { id: self.id.clone(), msg };
        let c = self.constraint();
        c.validate().map_err(|e| invalid(e.to_string()))?;
        if self.structure.species != c.expanded_species() {
            return Err(invalid("species do not follow the Wyckoff assignment expansion".into()));
        }
        let system = crystal_system_of(self.space_group);
        if !satisfies_class(&self.structure.parameters(), system, tol) {
            return Err(invalid(format!("lattice violates the {system:?} class")));
        }
        let table = WyckoffTable::global();
        let mut start = 0;
        for a in &self.assignments {
            let w = table.position(self.space_group, a.letter).map_err(|e| invalid(e.to_string()))?;
            let block = &self.structure.frac_coords[start..start + w.multiplicity];
            let (p, _) = w.fit(block[0]);
            let orbit = w.orbit(p).map_err(|e| invalid(e.to_string()))?;
            for site in block {
                let d = orbit.iter().map(|o| periodic_max_distance(*o, *site)).fold(f64::INFINITY, f64::min);
                if d > tol {
                    return Err(invalid(format!(
                        "site {site:?} is {d:.2e} off its {}{} orbit",
                        w.multiplicity, a.letter
                    )));
                }
            }
            start += w.multiplicity;
        }
        Ok(())
    }

    pub fn training_record(&self, kind: PropertyKind) -> Result<TrainingRecord, DataError> {
        let value = self
            .property(kind.key())
            .ok_or_else(|| DataError::MissingField { id: self.id.clone(), field: kind.key().into() })?;
        Ok(TrainingRecord {
            id: self.id.clone(),
            structure: self.structure.clone(),
            constraint: self.constraint(),
            property: value,
        })
    }

    fn to_doc(&self) -> RecordDoc {
        RecordDoc {
            id: self.id.clone(),
            space_group: self.space_group.index() as i64,
            lattice: LatticeDoc { matrix: self.structure.lattice.rows, parameters: Some(self.structure.parameters()) },
            species: self.structure.species.clone(),
            frac_coords: self.structure.frac_coords.clone(),
            assignments: self.assignments.clone(),
            properties: self.properties.clone(),
        }
    }

    fn from_doc(doc: RecordDoc) -> Result<Self, DataError> {
        let invalid = |msg: String| DataError::Invalid { id: doc.id.clone(), msg };
        let sg = SpaceGroupId::new(doc.space_group).map_err(|e| invalid(e.to_string()))?;
        let lattice = LatticeMatrix::new(doc.lattice.matrix).map_err(|e| invalid(e.to_string()))?;
        let s = CrystalStructure::new(doc.species, doc.frac_coords, lattice).map_err(|e| invalid(e.to_string()))?;
        if let Some((k, _)) = doc.properties.iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("property {k} is not finite")));
        }
        Self::new(doc.id.clone(), s, sg, doc.assignments, doc.properties)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("record serialises")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        let doc: RecordDoc = serde_json::from_str(line)?;
        Self::from_doc(doc).map_err(serde::de::Error::custom)
    }
}

/// Reads `structures.v1`. Strict mode also checks every record's symmetry
/// to [`STRICT_TOL`].
pub fn load_structures(path: &Path, strict: bool) -> Result<Vec<StructureRecord>, DataError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| DataError::Malformed { path: path.display().to_string(), line: i + 1, msg };
        let doc: RecordDoc = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let rec = StructureRecord::from_doc(doc)?;
        if strict {
            rec.check_symmetry(STRICT_TOL)?;
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes `structures.v1` through a temporary file renamed into place.
pub fn save_structures(path: &Path, records: &[StructureRecord]) -> Result<(), DataError> {
    let tmp = path.with_extension("tmp-write");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for r in records {
            w.write_all(r.to_json_line().as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
