//! Crystallographic machinery: space groups, lattice classes, Wyckoff orbits
//! and the projections that put structures on the symmetry manifold.

mod group;
mod lattice;
mod structure;
mod wyckoff;

pub use group::{
    crystal_system_of, lattice_dof, space_group_symbol, CrystalSystem, LatticeSlot, SpaceGroupId, RHOMBOHEDRAL_GROUPS,
};
pub use lattice::{project_lattice, satisfies_class, LatticeMatrix, LatticeParameters, CLASS_TOL};
pub use structure::{realize_structure, CrystalStructure, SiteAssignment, SymmetryConstraint};
pub use wyckoff::{
    letter_rank, orbit_closed, periodic_max_distance, project_fractional, wrap3, wrap_unit, wyckoff_orbit, AffineMap,
    WyckoffPosition, WyckoffTable, SITE_TOL,
};
