#![allow(dead_code)]

use std::collections::BTreeMap;

pub mod oracle;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use symgen::data_io::StructureRecord;
use symgen::symmetry::{
    project_lattice, realize_structure, CrystalStructure, LatticeParameters, SiteAssignment, SpaceGroupId,
    SymmetryConstraint, WyckoffTable,
};

pub fn sg(n: i64) -> SpaceGroupId {
    SpaceGroupId::new(n).unwrap()
}

pub struct Fixture {
    pub id: &'static str,
    pub sg: i64,
    pub sites: &'static [(&'static str, char, [f64; 3])],
    pub lattice: [f64; 6],
    pub band_gap: f64,
    pub formation_energy: f64,
    pub e_hull: f64,
}

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        id: "fx-nacl",
        sg: 225,
        sites: &[("Na", 'a', [0.0; 3]), ("Cl", 'b', [0.0; 3])],
        lattice: [5.64, 5.64, 5.64, 90.0, 90.0, 90.0],
        band_gap: 5.0,
        formation_energy: -2.1,
        e_hull: 0.0,
    },
    Fixture {
        id: "fx-mgo",
        sg: 225,
        sites: &[("Mg", 'a', [0.0; 3]), ("O", 'b', [0.0; 3])],
        lattice: [4.21, 4.21, 4.21, 90.0, 90.0, 90.0],
        band_gap: 4.45,
        formation_energy: -3.05,
        e_hull: 0.0,
    },
    Fixture {
        id: "fx-cu",
        sg: 225,
        sites: &[("Cu", 'a', [0.0; 3])],
        lattice: [3.61, 3.61, 3.61, 90.0, 90.0, 90.0],
        band_gap: 0.0,
        formation_energy: 0.0,
        e_hull: 0.0,
    },
    Fixture {
        id: "fx-cscl",
        sg: 221,
        sites: &[("Cs", 'a', [0.0; 3]), ("Cl", 'b', [0.0; 3])],
        lattice: [4.12, 4.12, 4.12, 90.0, 90.0, 90.0],
        band_gap: 5.1,
        formation_energy: -2.2,
        e_hull: 0.02,
    },
    Fixture {
        id: "fx-srtio3",
        sg: 221,
        sites: &[("Sr", 'a', [0.0; 3]), ("Ti", 'b', [0.0; 3]), ("O", 'c', [0.0; 3])],
        lattice: [3.905, 3.905, 3.905, 90.0, 90.0, 90.0],
        band_gap: 1.8,
        formation_energy: -3.4,
        e_hull: 0.0,
    },
    Fixture {
        id: "fx-tio2",
        sg: 136,
        sites: &[("Ti", 'a', [0.0; 3]), ("O", 'f', [0.305, 0.0, 0.0])],
        lattice: [4.594, 4.594, 2.959, 90.0, 90.0, 90.0],
        band_gap: 1.77,
        formation_energy: -3.3,
        e_hull: 0.0,
    },
    Fixture {
        id: "fx-zno",
        sg: 186,
        sites: &[("Zn", 'b', [0.0, 0.0, 0.0]), ("O", 'b', [0.0, 0.0, 0.38])],
        lattice: [3.25, 3.25, 5.21, 90.0, 90.0, 120.0],
        band_gap: 0.73,
        formation_energy: -1.8,
        e_hull: 0.0,
    },
    Fixture {
        id: "fx-si",
        sg: 227,
        sites: &[("Si", 'a', [0.0; 3])],
        lattice: [5.43, 5.43, 5.43, 90.0, 90.0, 90.0],
        band_gap: 0.61,
        formation_energy: 0.0,
        e_hull: 0.0,
    },
    Fixture {
        id: "fx-nacl-hp",
        sg: 221,
        sites: &[("Na", 'a', [0.0; 3]), ("Cl", 'b', [0.0; 3])],
        lattice: [3.3, 3.3, 3.3, 90.0, 90.0, 90.0],
        band_gap: 4.2,
        formation_energy: -1.9,
        e_hull: 0.25,
    },
    Fixture {
        id: "fx-fe",
        sg: 229,
        sites: &[("Fe", 'a', [0.0; 3])],
        lattice: [2.87, 2.87, 2.87, 90.0, 90.0, 90.0],
        band_gap: 0.0,
        formation_energy: 0.0,
        e_hull: 0.35,
    },
];

impl Fixture {
    pub fn constraint(&self) -> SymmetryConstraint {
        let a = self.sites.iter().map(|(e, l, _)| SiteAssignment::new(*e, *l)).collect();
        SymmetryConstraint::new(sg(self.sg), a).unwrap()
    }

    pub fn record(&self) -> StructureRecord {
        let [a, b, c, al, be, ga] = self.lattice;
        let p = LatticeParameters::new(a, b, c, al, be, ga).unwrap();
        let free: Vec<[f64; 3]> = self.sites.iter().map(|s| s.2).collect();
        let c = self.constraint();
        let s = realize_structure(&c, &p, &free).unwrap();
        let mut props = BTreeMap::new();
        props.insert("band_gap".to_string(), self.band_gap);
        props.insert("formation_energy".to_string(), self.formation_energy);
        props.insert("energy_above_hull".to_string(), self.e_hull);
        StructureRecord::new(self.id, s, c.space_group, c.assignments, props).unwrap()
    }
}

pub fn fixture_corpus() -> Vec<StructureRecord> {
    FIXTURES.iter().map(Fixture::record).collect()
}

pub fn nacl() -> StructureRecord {
    FIXTURES[0].record()
}

/// A random constraint whose fixed letters are each used once.
pub fn random_constraint<R: Rng>(rng: &mut R, max_sites: usize) -> SymmetryConstraint {
    const ELEMENTS: [&str; 8] = ["Li", "O", "Mg", "Si", "Ti", "Fe", "Ba", "Cl"];
    let table = WyckoffTable::global();
    loop {
        let g = sg(rng.random_range(1..=230));
        let positions = table.positions(g);
        let n = rng.random_range(1..=3);
        let mut used = Vec::new();
        let mut assignments = Vec::new();
        for _ in 0..n {
            let w = positions.choose(rng).unwrap();
            if w.is_fixed() && used.contains(&w.letter) {
                continue;
            }
            used.push(w.letter);
            assignments.push(SiteAssignment::new(*ELEMENTS.choose(rng).unwrap(), w.letter));
        }
        let Ok(c) = SymmetryConstraint::new(g, assignments) else { continue };
        if c.assignments.is_empty() || c.num_sites() > max_sites {
            continue;
        }
        return c;
    }
}

/// A random cell projected onto the group's lattice class.
pub fn random_lattice<R: Rng>(rng: &mut R, g: SpaceGroupId) -> LatticeParameters {
    loop {
        let p = LatticeParameters::new(
            rng.random_range(3.0..8.0),
            rng.random_range(3.0..8.0),
            rng.random_range(3.0..8.0),
            rng.random_range(70.0..110.0),
            rng.random_range(70.0..110.0),
            rng.random_range(70.0..110.0),
        );
        if let Ok(p) = p {
            if let Ok(q) = project_lattice(&p, g) {
                return q;
            }
        }
    }
}

/// Up to `max_atoms` sites of Na/Cl on a random triclinic cell.
pub fn random_cell<R: Rng>(rng: &mut R, max_atoms: usize) -> CrystalStructure {
    let n = rng.random_range(1..=max_atoms);
    let p = loop {
        let p = LatticeParameters::new(
            rng.random_range(3.0..7.0),
            rng.random_range(3.0..7.0),
            rng.random_range(3.0..7.0),
            rng.random_range(70.0..110.0),
            rng.random_range(70.0..110.0),
            rng.random_range(70.0..110.0),
        );
        if let Ok(p) = p {
            break p;
        }
    };
    let species = (0..n).map(|_| if rng.random_bool(0.5) { "Na" } else { "Cl" }.to_string()).collect();
    let coords = (0..n).map(|_| [rng.random::<f64>(), rng.random(), rng.random()]).collect();
    CrystalStructure::new(species, coords, p.to_matrix()).unwrap()
}

/// A shuffled, translated copy with jittered sites and cell.
pub fn jittered_copy<R: Rng>(
    rng: &mut R,
    s: &CrystalStructure,
    site_jitter: f64,
    cell_jitter: f64,
) -> CrystalStructure {
    let mut idx: Vec<usize> = (0..s.species.len()).collect();
    idx.shuffle(rng);
    let t = [rng.random::<f64>(), rng.random(), rng.random()];
    let p = s.parameters();
    let mut j = |x: f64, scale: f64| x * (1.0 + rng.random_range(-scale..=scale));
    let q = LatticeParameters::new(
        j(p.a, cell_jitter),
        j(p.b, cell_jitter),
        j(p.c, cell_jitter),
        j(p.alpha, cell_jitter / 4.0),
        j(p.beta, cell_jitter / 4.0),
        j(p.gamma, cell_jitter / 4.0),
    )
    .unwrap_or(p);
    let species = idx.iter().map(|&i| s.species[i].clone()).collect();
    let coords = idx
        .iter()
        .map(|&i| [0, 1, 2].map(|k| s.frac_coords[i][k] + t[k] + rng.random_range(-site_jitter..=site_jitter)))
        .collect();
    CrystalStructure::new(species, coords, q.to_matrix()).unwrap()
}
