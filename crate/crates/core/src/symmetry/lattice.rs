use serde::{Deserialize, Serialize};

use super::group::{crystal_system_of, CrystalSystem, LatticeSlot, SpaceGroupId};
use crate::error::SymmetryError;

/// Tolerance used when checking that a cell satisfies its constraint class.
pub const CLASS_TOL: f64 = 1e-9;

/// Cell lengths in Å and angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParameters {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LatticeParameters {
    pub fn new(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self, SymmetryError> {
        let p = Self { a, b, c, alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn cubic(a: f64) -> Result<Self, SymmetryError> {
        Self::new(a, a, a, 90.0, 90.0, 90.0)
    }

    pub fn validate(&self) -> Result<(), SymmetryError> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SymmetryError::InvalidLattice(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0 && v < 180.0) {
                return Err(SymmetryError::InvalidLattice(format!("{name} = {v} outside (0, 180)")));
            }
        }
        let vol = self.volume();
        if !(vol > 0.0) {
            return Err(SymmetryError::DegenerateLattice(vol));
        }
        Ok(())
    }

    /// Cell volume; NaN or non-positive when the angles cannot close a cell.
    pub fn volume(&self) -> f64 {
        let (ca, cb, cg) = (cosd(self.alpha), cosd(self.beta), cosd(self.gamma));
        let g = 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg;
        if g <= 1e-12 {
            return 0.0;
        }
        self.a * self.b * self.c * g.sqrt()
    }

    pub fn lengths(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn get(&self, slot: LatticeSlot) -> f64 {
        match slot {
            LatticeSlot::A => self.a,
            LatticeSlot::B => self.b,
            LatticeSlot::C => self.c,
            LatticeSlot::Alpha => self.alpha,
            LatticeSlot::Beta => self.beta,
            LatticeSlot::Gamma => self.gamma,
        }
    }

    fn set(&mut self, slot: LatticeSlot, v: f64) {
        match slot {
            LatticeSlot::A => self.a = v,
            LatticeSlot::B => self.b = v,
            LatticeSlot::C => self.c = v,
            LatticeSlot::Alpha => self.alpha = v,
            LatticeSlot::Beta => self.beta = v,
            LatticeSlot::Gamma => self.gamma = v,
        }
    }

    /// Values of the independent parameters of `system`, in slot order.
    pub fn to_slots(&self, system: CrystalSystem) -> Vec<f64> {
        system.lattice_slots().iter().map(|s| self.get(*s)).collect()
    }

    /// Rebuilds a full parameter set from independent values; dependent
    /// parameters are filled in from the class rules.
    pub fn from_slots(system: CrystalSystem, values: &[f64]) -> Result<Self, SymmetryError> {
        let slots = system.lattice_slots();
        if values.len() != slots.len() {
            return Err(SymmetryError::InvalidLattice(format!(
                "{:?} needs {} parameters, got {}",
                system,
                slots.len(),
                values.len()
            )));
        }
        let mut p = Self { a: 1.0, b: 1.0, c: 1.0, alpha: 90.0, beta: 90.0, gamma: 90.0 };
        for (s, v) in slots.iter().zip(values) {
            p.set(*s, *v);
        }
        match system {
            CrystalSystem::Cubic => {
                p.b = p.a;
                p.c = p.a;
            }
            CrystalSystem::Tetragonal => p.b = p.a,
            CrystalSystem::TrigonalRhombohedral | CrystalSystem::TrigonalHexagonalAxes | CrystalSystem::Hexagonal => {
                p.b = p.a;
                p.gamma = 120.0;
            }
            _ => {}
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_matrix(&self) -> LatticeMatrix {
        let (ca, cb, cg) = (cosd(self.alpha), cosd(self.beta), cosd(self.gamma));
        let sg = sind(self.gamma);
        let cx = self.c * cb;
        let cy = self.c * (ca - cb * cg) / sg;
        let cz = (self.c * self.c - cx * cx - cy * cy).max(0.0).sqrt();
        LatticeMatrix { rows: [[self.a, 0.0, 0.0], [self.b * cg, self.b * sg, 0.0], [cx, cy, cz]] }
    }
}

/// Checks the Table-6 style constraints of `system` on `p` within `tol`
/// (lengths relative, angles in degrees).
pub fn satisfies_class(p: &LatticeParameters, system: CrystalSystem, tol: f64) -> bool {
    let eq = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0);
    let right = |x: f64| (x - 90.0).abs() <= tol;
    match system {
        CrystalSystem::Triclinic => true,
        CrystalSystem::Monoclinic => right(p.alpha) && right(p.gamma),
        CrystalSystem::Orthorhombic => right(p.alpha) && right(p.beta) && right(p.gamma),
        CrystalSystem::Tetragonal => eq(p.a, p.b) && right(p.alpha) && right(p.beta) && right(p.gamma),
        CrystalSystem::TrigonalRhombohedral | CrystalSystem::TrigonalHexagonalAxes | CrystalSystem::Hexagonal => {
            eq(p.a, p.b) && right(p.alpha) && right(p.beta) && (p.gamma - 120.0).abs() <= tol
        }
        CrystalSystem::Cubic => eq(p.a, p.b) && eq(p.b, p.c) && right(p.alpha) && right(p.beta) && right(p.gamma),
    }
}

/// Nearest parameters satisfying the group's constraint class: lengths tied by
/// equality are replaced by their mean, fixed angles are set exactly.
pub fn project_lattice(params: &LatticeParameters, sg: SpaceGroupId) -> Result<LatticeParameters, SymmetryError> {
    let system = crystal_system_of(sg);
    let mut p = *params;
    match system {
        CrystalSystem::Triclinic => {}
        CrystalSystem::Monoclinic => {
            p.alpha = 90.0;
            p.gamma = 90.0;
        }
        CrystalSystem::Orthorhombic => {
            p.alpha = 90.0;
            p.beta = 90.0;
            p.gamma = 90.0;
        }
        CrystalSystem::Tetragonal => {
            let m = 0.5 * (p.a + p.b);
            p.a = m;
            p.b = m;
            p.alpha = 90.0;
            p.beta = 90.0;
            p.gamma = 90.0;
        }
        CrystalSystem::TrigonalRhombohedral | CrystalSystem::TrigonalHexagonalAxes | CrystalSystem::Hexagonal => {
            let m = 0.5 * (p.a + p.b);
            p.a = m;
            p.b = m;
            p.alpha = 90.0;
            p.beta = 90.0;
            p.gamma = 120.0;
        }
        CrystalSystem::Cubic => {
            let m = (p.a + p.b + p.c) / 3.0;
            p.a = m;
            p.b = m;
            p.c = m;
            p.alpha = 90.0;
            p.beta = 90.0;
            p.gamma = 90.0;
        }
    }
    let vol = p.volume();
    if !(vol > 0.0) || !p.a.is_finite() {
        return Err(SymmetryError::DegenerateLattice(vol));
    }
    p.validate()?;
    Ok(p)
}

/// Cell vectors as rows, in Å. Orientation: first vector along +x, second in
/// the xy-plane with positive y, third completing a right-handed set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeMatrix {
    pub rows: [[f64; 3]; 3],
}

impl LatticeMatrix {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, SymmetryError> {
        let m = Self { rows };
        let det = m.determinant();
        if !(det > 0.0) {
            return Err(SymmetryError::DegenerateLattice(det));
        }
        Ok(m)
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    pub fn volume(&self) -> f64 {
        self.determinant().abs()
    }

    pub fn to_parameters(&self) -> LatticeParameters {
        let r = &self.rows;
        let norm = |v: &[f64; 3]| dot(v, v).sqrt();
        let (a, b, c) = (norm(&r[0]), norm(&r[1]), norm(&r[2]));
        let ang =
            |u: &[f64; 3], v: &[f64; 3], nu: f64, nv: f64| (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees();
        LatticeParameters {
            a,
            b,
            c,
            alpha: ang(&r[1], &r[2], b, c),
            beta: ang(&r[0], &r[2], a, c),
            gamma: ang(&r[0], &r[1], a, b),
        }
    }

    /// Cartesian position of a fractional coordinate.
    pub fn to_cartesian(&self, frac: [f64; 3]) -> [f64; 3] {
        let r = &self.rows;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = frac[0] * r[0][k] + frac[1] * r[1][k] + frac[2] * r[2][k];
        }
        out
    }
}

pub(crate) fn dot(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

fn cosd(deg: f64) -> f64 {
    // exact zero for right angles keeps projected cells bit-stable
    if deg == 90.0 {
        0.0
    } else {
        deg.to_radians().cos()
    }
}

fn sind(deg: f64) -> f64 {
    if deg == 90.0 {
        1.0
    } else {
        deg.to_radians().sin()
    }
}
