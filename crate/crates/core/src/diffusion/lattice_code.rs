//! Reduced lattice representation: one real per independent cell parameter
//! of the space group's constraint class.

use serde::{Deserialize, Serialize};

use crate::error::SymmetryError;
use crate::symmetry::{crystal_system_of, CrystalSystem, LatticeParameters, SpaceGroupId};

/// Reference length (Å) for the log-length encoding.
pub const LENGTH_REF: f64 = 4.5;
/// Half-width (degrees) of the monoclinic β range around 90°.
pub const MONOCLINIC_ANGLE_SPAN: f64 = 60.0;
/// Half-width (degrees) of the triclinic angle range around 90°.
pub const TRICLINIC_ANGLE_SPAN: f64 = 45.0;
/// Bound applied to denoised values before decoding.
pub const CODE_CLIP: f64 = 3.0;
/// Width of the fixed lattice feature vector fed to the denoiser
/// (6 padded values + one-hot crystal system).
pub const LATTICE_FEATURES: usize = 6 + 8;

/// Lattice degrees of freedom: lengths as `ln(ℓ / LENGTH_REF)`, free angles
/// as `atanh((θ − 90°) / span)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeDof {
    pub values: Vec<f64>,
}

fn angle_span(system: CrystalSystem) -> f64 {
    if system == CrystalSystem::Triclinic {
        TRICLINIC_ANGLE_SPAN
    } else {
        MONOCLINIC_ANGLE_SPAN
    }
}

impl LatticeDof {
    /// Encodes a cell already satisfying the group's class. Angles outside
    /// the representable range are pulled just inside it.
    pub fn encode(params: &LatticeParameters, sg: SpaceGroupId) -> Self {
        let system = crystal_system_of(sg);
        let span = angle_span(system);
        let values = system
            .lattice_slots()
            .iter()
            .map(|slot| {
                let v = params.get(*slot);
                if slot.is_length() {
                    (v / LENGTH_REF).ln()
                } else {
                    ((v - 90.0) / span).clamp(-0.999_999, 0.999_999).atanh()
                }
            })
            .collect();
        Self { values }
    }

    /// Decodes into full cell parameters satisfying the group's class exactly.
    pub fn decode(&self, sg: SpaceGroupId) -> Result<LatticeParameters, SymmetryError> {
        let system = crystal_system_of(sg);
        let slots = system.lattice_slots();
        if slots.len() != self.values.len() {
            return Err(SymmetryError::InvalidLattice(format!(
                "space group {sg} has {} lattice DOF, got {}",
                slots.len(),
                self.values.len()
            )));
        }
        let span = angle_span(system);
        let raw: Vec<f64> = slots
            .iter()
            .zip(&self.values)
            .map(|(slot, k)| if slot.is_length() { LENGTH_REF * k.exp() } else { 90.0 + span * k.tanh() })
            .collect();
        LatticeParameters::from_slots(system, &raw)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Denoiser lattice features: values padded to 6, then crystal-system one-hot.
pub fn lattice_features(values: &[f64], sg: SpaceGroupId) -> [f64; LATTICE_FEATURES] {
    let mut out = [0.0; LATTICE_FEATURES];
    for (o, v) in out.iter_mut().zip(values) {
        *o = *v;
    }
    out[6 + crystal_system_of(sg).ordinal()] = 1.0;
    out
}
