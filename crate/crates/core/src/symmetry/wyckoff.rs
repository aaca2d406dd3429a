use std::sync::OnceLock;

use num_rational::Rational64;
use serde::Deserialize;

use super::group::{CrystalSystem, SpaceGroupId};
use crate::error::SymmetryError;

const BUNDLED_TABLE: &str = include_str!("../../data/wyckoff_table.v1.jsonl");

/// Distance below which two fractional points (mod 1) are the same site.
pub const SITE_TOL: f64 = 1e-9;

/// Maps a fractional component into `[0, 1)`; exactly-1.0 results become 0.0.
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 || y == 0.0 {
        0.0
    } else {
        y
    }
}

pub fn wrap3(p: [f64; 3]) -> [f64; 3] {
    [wrap_unit(p[0]), wrap_unit(p[1]), wrap_unit(p[2])]
}

/// Largest per-axis distance between two points on the unit torus.
pub fn periodic_max_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let d = (a[k] - b[k]).rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max)
}

/// Affine map on (x, y, z, 1) with exact rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    exact: [[Rational64; 4]; 3],
    float: [[f64; 4]; 3],
}

impl AffineMap {
    pub fn from_exact(exact: [[Rational64; 4]; 3]) -> Self {
        let mut float = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..4 {
                float[i][j] = *exact[i][j].numer() as f64 / *exact[i][j].denom() as f64;
            }
        }
        Self { exact, float }
    }

    pub fn exact(&self) -> &[[Rational64; 4]; 3] {
        &self.exact
    }

    pub fn linear(&self) -> [[f64; 3]; 3] {
        let f = &self.float;
        [[f[0][0], f[0][1], f[0][2]], [f[1][0], f[1][1], f[1][2]], [f[2][0], f[2][1], f[2][2]]]
    }

    pub fn translation(&self) -> [f64; 3] {
        [self.float[0][3], self.float[1][3], self.float[2][3]]
    }

    /// Applies the map without wrapping.
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let f = &self.float;
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = f[i][0] * p[0] + f[i][1] * p[1] + f[i][2] * p[2] + f[i][3];
        }
        out
    }

    fn column_is_zero(&self, j: usize) -> bool {
        (0..3).all(|i| self.exact[i][j] == Rational64::from_integer(0))
    }

    /// Renders rows as `p/q` strings, the bundled table's cell format.
    pub fn to_strings(&self) -> [[String; 4]; 3] {
        let fmt = |r: &Rational64| {
            if *r.denom() == 1 {
                r.numer().to_string()
            } else {
                format!("{}/{}", r.numer(), r.denom())
            }
        };
        [0, 1, 2].map(|i| [0, 1, 2, 3].map(|j| fmt(&self.exact[i][j])))
    }
}

fn parse_rational(s: &str) -> Result<Rational64, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let q: i64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if q == 0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Rational64::new(p, q))
        }
        None => s.parse::<i64>().map(Rational64::from_integer).map_err(|_| format!("bad rational {s:?}")),
    }
}

/// One Wyckoff position: its orbit maps and which of x, y, z are free.
#[derive(Debug, Clone, PartialEq)]
pub struct WyckoffPosition {
    pub letter: char,
    pub multiplicity: usize,
    pub orbit_maps: Vec<AffineMap>,
    pub free_mask: [bool; 3],
}

impl WyckoffPosition {
    pub fn n_free(&self) -> usize {
        self.free_mask.iter().filter(|b| **b).count()
    }

    pub fn is_fixed(&self) -> bool {
        self.n_free() == 0
    }

    /// Zeroes components that are not free parameters.
    pub fn mask(&self, p: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..3 {
            if self.free_mask[k] {
                out[k] = p[k];
            }
        }
        out
    }

    /// All orbit points for the given free parameters, wrapped into `[0, 1)`.
    pub fn orbit(&self, free_params: [f64; 3]) -> Result<Vec<[f64; 3]>, SymmetryError> {
        let p = self.mask(free_params);
        let pts: Vec<[f64; 3]> = self.orbit_maps.iter().map(|m| wrap3(m.apply(p))).collect();
        for i in 0..pts.len() {
            for j in 0..i {
                if periodic_max_distance(pts[i], pts[j]) < SITE_TOL {
                    return Err(SymmetryError::TableIntegrity(format!(
                        "letter {}: orbit points {j} and {i} coincide at {:?}",
                        self.letter, pts[i]
                    )));
                }
            }
        }
        Ok(pts)
    }

    /// Least-squares fit of the free parameters of the first orbit map to
    /// `coords`, searching lattice shifts in {-1, 0, 1}^3. Returns the fitted
    /// parameters (free entries in `[0, 1)`, others 0) and the regenerated
    /// representative point.
    pub fn fit(&self, coords: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let map = &self.orbit_maps[0];
        let lin = map.linear();
        let t = map.translation();
        let free: Vec<usize> = (0..3).filter(|k| self.free_mask[*k]).collect();
        if free.is_empty() {
            return ([0.0; 3], wrap3(t));
        }
        let mut best: Option<(f64, [f64; 3])> = None;
        for n0 in -1..=1 {
            for n1 in -1..=1 {
                for n2 in -1..=1 {
                    let n = [n0 as f64, n1 as f64, n2 as f64];
                    let rhs: [f64; 3] = [0, 1, 2].map(|i| coords[i] + n[i] - t[i]);
                    let sol = least_squares(&lin, &free, rhs);
                    let mut p = [0.0; 3];
                    for (idx, k) in free.iter().enumerate() {
                        p[*k] = sol[idx];
                    }
                    let fitted = map.apply(p);
                    let res: f64 = (0..3).map(|i| (fitted[i] - coords[i] - n[i]).powi(2)).sum();
                    if best.as_ref().map_or(true, |(r, _)| res < *r - 1e-15) {
                        best = Some((res, p));
                    }
                }
            }
        }
        let (_, p) = best.expect("shift search is non-empty");
        let params = [0, 1, 2].map(|k| if self.free_mask[k] { wrap_unit(p[k]) } else { 0.0 });
        (params, wrap3(map.apply(params)))
    }
}

/// Solves min |A_f x - rhs| over the columns `free` of `a` via normal equations.
fn least_squares(a: &[[f64; 3]; 3], free: &[usize], rhs: [f64; 3]) -> Vec<f64> {
    let k = free.len();
    let mut m = vec![vec![0.0; k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            m[r][c] = (0..3).map(|i| a[i][free[r]] * a[i][free[c]]).sum();
        }
        m[r][k] = (0..3).map(|i| a[i][free[r]] * rhs[i]).sum();
    }
    // Gaussian elimination with partial pivoting
    for col in 0..k {
        let piv = (col..k).max_by(|x, y| m[*x][col].abs().total_cmp(&m[*y][col].abs())).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for c in col..=k {
            m[col][c] /= d;
        }
        for r in 0..k {
            if r != col {
                let f = m[r][col];
                for c in col..=k {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..k).map(|r| m[r][k]).collect()
}

#[derive(Debug, Deserialize)]
struct TableRecord {
    sg: i64,
    letter: String,
    mult: usize,
    maps: Vec<[[String; 4]; 3]>,
    free: [bool; 3],
    lattice_class: String,
}

/// Wyckoff positions of all 230 space groups, letters in ascending order
/// (general position last).
#[derive(Debug, Clone)]
pub struct WyckoffTable {
    groups: Vec<Vec<WyckoffPosition>>,
    classes: Vec<CrystalSystem>,
}

impl WyckoffTable {
    /// Parses the `wyckoff_table.v1` line format. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, SymmetryError> {
        let mut groups: Vec<Vec<WyckoffPosition>> = vec![Vec::new(); 230];
        let mut classes: Vec<Option<CrystalSystem>> = vec![None; 230];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| SymmetryError::TableIntegrity(format!("line {}: {msg}", lineno + 1));
            let rec: TableRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let sg = SpaceGroupId::new(rec.sg).map_err(|e| err(e.to_string()))?;
            let mut chars = rec.letter.chars();
            let letter = match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => c,
                _ => return Err(err(format!("bad letter {:?}", rec.letter))),
            };
            let class = CrystalSystem::from_lattice_class_tag(&rec.lattice_class)
                .ok_or_else(|| err(format!("unknown lattice class {:?}", rec.lattice_class)))?;
            let slot = &mut classes[sg.index() as usize - 1];
            match slot {
                Some(c) if *c != class => return Err(err(format!("inconsistent lattice class for group {sg}"))),
                _ => *slot = Some(class),
            }
            if rec.maps.len() != rec.mult {
                return Err(err(format!("multiplicity {} but {} maps", rec.mult, rec.maps.len())));
            }
            let mut maps = Vec::with_capacity(rec.mult);
            for m in &rec.maps {
                let mut exact = [[Rational64::from_integer(0); 4]; 3];
                for i in 0..3 {
                    for j in 0..4 {
                        exact[i][j] = parse_rational(&m[i][j]).map_err(err)?;
                    }
                }
                maps.push(AffineMap::from_exact(exact));
            }
            for m in &maps {
                for j in 0..3 {
                    if !rec.free[j] && !m.column_is_zero(j) {
                        return Err(err(format!("letter {letter}: column {j} not free but used")));
                    }
                }
            }
            let group = &mut groups[sg.index() as usize - 1];
            if group.iter().any(|w| w.letter == letter) {
                return Err(err(format!("duplicate letter {letter} in group {sg}")));
            }
            group.push(WyckoffPosition { letter, multiplicity: rec.mult, orbit_maps: maps, free_mask: rec.free });
        }
        let missing: Vec<usize> = groups.iter().enumerate().filter(|(_, g)| g.is_empty()).map(|(i, _)| i + 1).collect();
        if !missing.is_empty() {
            return Err(SymmetryError::TableIntegrity(format!("missing space groups {missing:?}")));
        }
        for g in &mut groups {
            g.sort_by_key(|w| letter_rank(w.letter));
        }
        Ok(Self { groups, classes: classes.into_iter().map(|c| c.unwrap()).collect() })
    }

    /// The bundled table, parsed once.
    pub fn global() -> &'static WyckoffTable {
        static TABLE: OnceLock<WyckoffTable> = OnceLock::new();
        TABLE.get_or_init(|| WyckoffTable::parse(BUNDLED_TABLE).expect("bundled Wyckoff table is valid"))
    }

    pub fn positions(&self, sg: SpaceGroupId) -> &[WyckoffPosition] {
        &self.groups[sg.index() as usize - 1]
    }

    pub fn position(&self, sg: SpaceGroupId, letter: char) -> Result<&WyckoffPosition, SymmetryError> {
        self.positions(sg)
            .iter()
            .find(|w| w.letter == letter)
            .ok_or(SymmetryError::UnknownWyckoff { sg: sg.index(), letter })
    }

    pub fn general_position(&self, sg: SpaceGroupId) -> &WyckoffPosition {
        self.positions(sg).last().expect("every group has a general position")
    }

    pub fn lattice_class(&self, sg: SpaceGroupId) -> CrystalSystem {
        self.classes[sg.index() as usize - 1]
    }

    pub fn letters(&self, sg: SpaceGroupId) -> Vec<char> {
        self.positions(sg).iter().map(|w| w.letter).collect()
    }
}

/// Ordering of Wyckoff letters: a..z, then the uppercase letter used for the
/// 27th position of Pmmm.
pub fn letter_rank(c: char) -> u32 {
    if c.is_ascii_lowercase() {
        c as u32 - 'a' as u32
    } else {
        26 + (c as u32 - 'A' as u32)
    }
}

/// Orbit of Wyckoff position `letter` of `sg`, wrapped into `[0, 1)`.
pub fn wyckoff_orbit(sg: SpaceGroupId, letter: char, free_params: [f64; 3]) -> Result<Vec<[f64; 3]>, SymmetryError> {
    WyckoffTable::global().position(sg, letter)?.orbit(free_params)
}

/// Fits free parameters of `letter` to a point; see [`WyckoffPosition::fit`].
pub fn project_fractional(
    coords: [f64; 3],
    sg: SpaceGroupId,
    letter: char,
) -> Result<([f64; 3], [f64; 3]), SymmetryError> {
    Ok(WyckoffTable::global().position(sg, letter)?.fit(coords))
}

/// Checks that each orbit is closed under the group's symmetry operations (the
/// general-position maps) for the given parameters.
pub fn orbit_closed(sg: SpaceGroupId, letter: char, free_params: [f64; 3], tol: f64) -> Result<bool, SymmetryError> {
    let table = WyckoffTable::global();
    let pts = table.position(sg, letter)?.orbit(free_params)?;
    let ops = &table.general_position(sg).orbit_maps;
    Ok(pts.iter().all(|p| {
        ops.iter().all(|op| {
            let q = wrap3(op.apply(*p));
            pts.iter().any(|r| periodic_max_distance(q, *r) < tol)
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sg(i: i64) -> SpaceGroupId {
        SpaceGroupId::new(i).unwrap()
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(-0.0), 0.0);
        assert_eq!(wrap_unit(-1e-20), 0.0);
        assert!(wrap_unit(0.999_999_999_999) < 1.0);
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("1/2").unwrap(), Rational64::new(1, 2));
        assert_eq!(parse_rational("-3/4").unwrap(), Rational64::new(-3, 4));
        assert_eq!(parse_rational("0").unwrap(), Rational64::from_integer(0));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn p1_is_identity() {
        let pts = wyckoff_orbit(sg(1), 'a', [0.1, 0.2, 0.3]).unwrap();
        assert_eq!(pts, vec![[0.1, 0.2, 0.3]]);
        let (p, rep) = project_fractional([0.4, 0.5, 0.6], sg(1), 'a').unwrap();
        assert!(periodic_max_distance(p, [0.4, 0.5, 0.6]) < 1e-12);
        assert!(periodic_max_distance(rep, [0.4, 0.5, 0.6]) < 1e-12);
    }

    #[test]
    fn p21m_a_has_two_sites() {
        let pts = wyckoff_orbit(sg(11), 'a', [0.0; 3]).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(WyckoffTable::global().letters(sg(11)), vec!['a', 'b', 'c', 'd', 'e', 'f']);
    }

    #[test]
    fn fm3m_a_contains_origin() {
        let pts = wyckoff_orbit(sg(225), 'a', [0.3, 0.3, 0.3]).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().any(|p| periodic_max_distance(*p, [0.0; 3]) < 1e-12));
        let (free, rep) = project_fractional([0.01, 0.995, 0.002], sg(225), 'a').unwrap();
        assert_eq!(free, [0.0; 3]);
        assert!(periodic_max_distance(rep, [0.0; 3]) < 1e-12);
    }

    #[test]
    fn unknown_letter() {
        assert_eq!(wyckoff_orbit(sg(1), 'b', [0.0; 3]), Err(SymmetryError::UnknownWyckoff { sg: 1, letter: 'b' }));
    }

    #[test]
    fn parse_rejects_incomplete_table() {
        let line = r#"{"sg": 1, "letter": "a", "mult": 1, "maps": [[["1","0","0","0"],["0","1","0","0"],["0","0","1","0"]]], "free": [true,true,true], "lattice_class": "triclinic"}"#;
        let err = WyckoffTable::parse(line).unwrap_err();
        assert!(matches!(err, SymmetryError::TableIntegrity(m) if m.contains("missing")));
    }

    #[test]
    fn parse_rejects_bad_multiplicity() {
        let line = r#"{"sg": 1, "letter": "a", "mult": 2, "maps": [[["1","0","0","0"],["0","1","0","0"],["0","0","1","0"]]], "free": [true,true,true], "lattice_class": "triclinic"}"#;
        assert!(WyckoffTable::parse(line).is_err());
    }

    #[test]
    fn parse_rejects_used_fixed_column() {
        let line = r#"{"sg": 1, "letter": "a", "mult": 1, "maps": [[["1","0","0","0"],["0","1","0","0"],["0","0","1","0"]]], "free": [true,true,false], "lattice_class": "triclinic"}"#;
        let err = WyckoffTable::parse(line).unwrap_err();
        assert!(matches!(err, SymmetryError::TableIntegrity(m) if m.contains("column 2")));
    }
}
