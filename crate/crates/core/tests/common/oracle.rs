//! Brute-force reference implementations used to cross-check the library.

use symgen::symmetry::{CrystalStructure, LatticeParameters};

fn matrix(p: &LatticeParameters) -> [[f64; 3]; 3] {
    let (ca, cb, cg) = (p.alpha.to_radians().cos(), p.beta.to_radians().cos(), p.gamma.to_radians().cos());
    let sg = p.gamma.to_radians().sin();
    let cx = cb;
    let cy = (ca - cb * cg) / sg;
    let cz = (1.0 - cx * cx - cy * cy).sqrt();
    [[p.a, 0.0, 0.0], [p.b * cg, p.b * sg, 0.0], [p.c * cx, p.c * cy, p.c * cz]]
}

fn det(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn dist_sq(m: &[[f64; 3]; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let base = [0, 1, 2].map(|k| {
        let x = b[k] - a[k];
        x - x.floor()
    });
    let mut best = f64::INFINITY;
    for i in -2..=2 {
        for j in -2..=2 {
            for k in -2..=2 {
                let d = [base[0] + i as f64, base[1] + j as f64, base[2] + k as f64];
                let c = [0, 1, 2].map(|col| (0..3).map(|r| d[r] * m[r][col]).sum::<f64>());
                best = best.min(c.iter().map(|v| v * v).sum());
            }
        }
    }
    best
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Normalised RMS over every species-respecting permutation and every
/// rarest-species anchor translation. `None` if compositions differ.
pub fn brute_force_rms(s1: &CrystalStructure, s2: &CrystalStructure) -> Option<f64> {
    let n = s1.species.len();
    let mut a = s1.species.clone();
    let mut b = s2.species.clone();
    a.sort();
    b.sort();
    if a != b {
        return None;
    }
    let (m1, m2) = (matrix(&s1.parameters()), matrix(&s2.parameters()));
    let mut m = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = (m1[r][c] + m2[r][c]) / 2.0;
        }
    }
    let count = |sp: &str| s1.species.iter().filter(|s| *s == sp).count();
    let rarest = s1.species.iter().min_by_key(|sp| (count(sp), (*sp).clone())).unwrap().clone();
    let perms: Vec<Vec<usize>> =
        permutations(n).into_iter().filter(|p| (0..n).all(|i| s1.species[i] == s2.species[p[i]])).collect();
    let mut best = f64::INFINITY;
    for i in (0..n).filter(|&i| s1.species[i] == rarest) {
        for j in (0..n).filter(|&j| s2.species[j] == rarest) {
            let t = [0, 1, 2].map(|k| s2.frac_coords[j][k] - s1.frac_coords[i][k]);
            for p in &perms {
                let sq: f64 = (0..n)
                    .map(|x| {
                        let moved = [0, 1, 2].map(|k| s1.frac_coords[x][k] + t[k]);
                        dist_sq(&m, moved, s2.frac_coords[p[x]])
                    })
                    .sum();
                best = best.min(sq);
            }
        }
    }
    let norm = (det(&m).abs() / n as f64).cbrt();
    Some((best / n as f64).sqrt() / norm)
}

/// Decision under the tolerances, computed from scratch.
pub fn brute_force_match(
    s1: &CrystalStructure,
    s2: &CrystalStructure,
    ltol: f64,
    stol: f64,
    angle_tol: f64,
) -> Option<f64> {
    let rms = brute_force_rms(s1, s2)?;
    let (p1, p2) = (s1.parameters(), s2.parameters());
    let sorted = |mut v: Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let (l1, l2) = (sorted(vec![p1.a, p1.b, p1.c]), sorted(vec![p2.a, p2.b, p2.c]));
    let (a1, a2) = (sorted(vec![p1.alpha, p1.beta, p1.gamma]), sorted(vec![p2.alpha, p2.beta, p2.gamma]));
    for k in 0..3 {
        if l1[k].max(l2[k]) / l1[k].min(l2[k]) > 1.0 + ltol || (a1[k] - a2[k]).abs() > angle_tol {
            return None;
        }
    }
    (rms <= stol).then_some(rms)
}
