use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::wyckoff::WyckoffTable;
use crate::error::SymmetryError;

/// International Tables space-group number, always within `1..=230`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u16")]
pub struct SpaceGroupId(u16);

impl SpaceGroupId {
    pub fn new(index: i64) -> Result<Self, SymmetryError> {
        if (1..=230).contains(&index) {
            Ok(Self(index as u16))
        } else {
            Err(SymmetryError::InvalidSpaceGroup(index))
        }
    }

    pub fn index(self) -> u16 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = SpaceGroupId> {
        (1..=230u16).map(SpaceGroupId)
    }
}

impl TryFrom<i64> for SpaceGroupId {
    type Error = SymmetryError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<SpaceGroupId> for u16 {
    fn from(v: SpaceGroupId) -> u16 {
        v.0
    }
}

impl fmt::Display for SpaceGroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lattice-shape class of a space group. Trigonal groups are split by their
/// lattice class; rhombohedral groups are expressed on hexagonal axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrystalSystem {
    Triclinic,
    Monoclinic,
    Orthorhombic,
    Tetragonal,
    TrigonalRhombohedral,
    TrigonalHexagonalAxes,
    Hexagonal,
    Cubic,
}

impl CrystalSystem {
    pub const ALL: [CrystalSystem; 8] = [
        CrystalSystem::Triclinic,
        CrystalSystem::Monoclinic,
        CrystalSystem::Orthorhombic,
        CrystalSystem::Tetragonal,
        CrystalSystem::TrigonalRhombohedral,
        CrystalSystem::TrigonalHexagonalAxes,
        CrystalSystem::Hexagonal,
        CrystalSystem::Cubic,
    ];

    pub fn ordinal(self) -> usize {
        Self::ALL.iter().position(|s| *s == self).unwrap()
    }

    /// Independent lattice parameters left by this class.
    pub fn lattice_slots(self) -> &'static [LatticeSlot] {
        use LatticeSlot::*;
        match self {
            CrystalSystem::Triclinic => &[A, B, C, Alpha, Beta, Gamma],
            CrystalSystem::Monoclinic => &[A, B, C, Beta],
            CrystalSystem::Orthorhombic => &[A, B, C],
            CrystalSystem::Tetragonal
            | CrystalSystem::TrigonalRhombohedral
            | CrystalSystem::TrigonalHexagonalAxes
            | CrystalSystem::Hexagonal => &[A, C],
            CrystalSystem::Cubic => &[A],
        }
    }

    /// Lattice-class tag used by the bundled Wyckoff table.
    pub fn lattice_class_tag(self) -> &'static str {
        match self {
            CrystalSystem::Triclinic => "triclinic",
            CrystalSystem::Monoclinic => "monoclinic",
            CrystalSystem::Orthorhombic => "orthorhombic",
            CrystalSystem::Tetragonal => "tetragonal",
            CrystalSystem::TrigonalRhombohedral => "rhombohedral",
            CrystalSystem::TrigonalHexagonalAxes => "trigonal",
            CrystalSystem::Hexagonal => "hexagonal",
            CrystalSystem::Cubic => "cubic",
        }
    }

    pub fn from_lattice_class_tag(tag: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.lattice_class_tag() == tag)
    }
}

/// One of the six cell parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeSlot {
    A,
    B,
    C,
    Alpha,
    Beta,
    Gamma,
}

impl LatticeSlot {
    pub fn is_length(self) -> bool {
        matches!(self, LatticeSlot::A | LatticeSlot::B | LatticeSlot::C)
    }
}

/// Crystal system by index range; the trigonal split follows the table's lattice-class flag.
pub fn crystal_system_of(sg: SpaceGroupId) -> CrystalSystem {
    match sg.index() {
        1..=2 => CrystalSystem::Triclinic,
        3..=15 => CrystalSystem::Monoclinic,
        16..=74 => CrystalSystem::Orthorhombic,
        75..=142 => CrystalSystem::Tetragonal,
        143..=167 => WyckoffTable::global().lattice_class(sg),
        168..=194 => CrystalSystem::Hexagonal,
        _ => CrystalSystem::Cubic,
    }
}

/// Number of independent lattice parameters for the group's constraint class.
pub fn lattice_dof(sg: SpaceGroupId) -> usize {
    crystal_system_of(sg).lattice_slots().len()
}

static SYMBOLS: &str = include_str!("../../data/space_group_symbols.v1.txt");

/// Short Hermann-Mauguin symbol, e.g. `Fm-3m` for 225.
pub fn space_group_symbol(sg: SpaceGroupId) -> &'static str {
    static TABLE: OnceLock<Vec<&'static str>> = OnceLock::new();
    let t = TABLE.get_or_init(|| SYMBOLS.lines().map(str::trim).filter(|l| !l.is_empty()).collect());
    t[sg.index() as usize - 1]
}

/// Rhombohedral-lattice groups (R-centred), used when building the table.
pub const RHOMBOHEDRAL_GROUPS: [u16; 7] = [146, 148, 155, 160, 161, 166, 167];
