//! The denoiser: input features, message-passing decoder layers with
//! multi-head cross-attention, and the two noise heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::embedding::{fourier_relative_embedding, rbf_property_embedding, sinusoidal_time_embedding, RbfGrid};
use super::lattice_code::{lattice_features, LatticeDof, LATTICE_FEATURES};
use super::tensor::{Tape, Tensor, Var};
use crate::elements;
use crate::error::DiffusionError;
use crate::property::{PropertyKind, PropertyTarget};
use crate::symmetry::{lattice_dof, wrap3, SymmetryConstraint, WyckoffPosition, WyckoffTable};

/// Layer widths and counts of the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub atom_dim: usize,
    pub prop_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Fourier bases per axis for relative coordinates (even).
    pub fourier_k: usize,
    pub rbf_centers: usize,
}

impl ModelConfig {
    /// Full-size widths: 512 atom embedding, 128 property embedding,
    /// 6 layers of 512, 2 heads.
    pub fn full() -> Self {
        Self {
            atom_dim: 512,
            prop_dim: 128,
            time_dim: 128,
            hidden: 512,
            n_layers: 6,
            n_heads: 2,
            fourier_k: 128,
            rbf_centers: 128,
        }
    }

    /// Desk-scale profile used by tests and the default CLI run.
    pub fn tiny() -> Self {
        Self {
            atom_dim: 32,
            prop_dim: 16,
            time_dim: 16,
            hidden: 64,
            n_layers: 2,
            n_heads: 2,
            fourier_k: 8,
            rbf_centers: 128,
        }
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        let bad = |m: &str| Err(DiffusionError::Config(m.to_string()));
        if self.atom_dim == 0 || self.prop_dim == 0 || self.hidden == 0 || self.n_layers == 0 {
            return bad("model widths and layer count must be positive");
        }
        if self.n_heads == 0 || self.hidden % self.n_heads != 0 {
            return bad("hidden width must be divisible by the head count");
        }
        if self.fourier_k == 0 || self.fourier_k % 2 != 0 {
            return bad("Fourier basis count must be even");
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return bad("time embedding width must be even");
        }
        if self.rbf_centers < 2 {
            return bad("need at least 2 RBF centres");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LayerIds {
    e_w1: usize,
    e_b1: usize,
    e_w2: usize,
    e_b2: usize,
    q: usize,
    k: usize,
    v: usize,
    o: usize,
    ob: usize,
}

#[derive(Debug, Clone)]
struct ParamIds {
    atom_emb: usize,
    p_w1: usize,
    p_b1: usize,
    p_w2: usize,
    p_b2: usize,
    in_w: usize,
    in_b: usize,
    layers: Vec<LayerIds>,
    lat_w1: usize,
    lat_b1: usize,
    lat_w2: usize,
    lat_b2: usize,
    crd_w1: usize,
    crd_b1: usize,
    crd_w2: usize,
    crd_b2: usize,
}

/// Name and shape of every weight tensor, in storage order.
fn layout(c: &ModelConfig) -> (Vec<(String, usize, usize)>, ParamIds) {
    let mut specs = Vec::new();
    let mut add = |name: String, r: usize, cols: usize| {
        specs.push((name, r, cols));
        specs.len() - 1
    };
    let h = c.hidden;
    let atom_emb = add("atom_embedding".into(), elements::count(), c.atom_dim);
    let p_w1 = add("prop_mlp.w1".into(), c.rbf_centers, c.prop_dim);
    let p_b1 = add("prop_mlp.b1".into(), 1, c.prop_dim);
    let p_w2 = add("prop_mlp.w2".into(), c.prop_dim, c.prop_dim);
    let p_b2 = add("prop_mlp.b2".into(), 1, c.prop_dim);
    let in_w = add("input.w".into(), c.atom_dim + c.prop_dim + c.time_dim, h);
    let in_b = add("input.b".into(), 1, h);
    let edge_in = 2 * h + LATTICE_FEATURES + 3 * c.fourier_k;
    let layers = (0..c.n_layers)
        .map(|l| LayerIds {
            e_w1: add(format!("layer{l}.edge.w1"), edge_in, h),
            e_b1: add(format!("layer{l}.edge.b1"), 1, h),
            e_w2: add(format!("layer{l}.edge.w2"), h, h),
            e_b2: add(format!("layer{l}.edge.b2"), 1, h),
            q: add(format!("layer{l}.attn.q"), h, h),
            k: add(format!("layer{l}.attn.k"), h, h),
            v: add(format!("layer{l}.attn.v"), h, h),
            o: add(format!("layer{l}.attn.o"), h, h),
            ob: add(format!("layer{l}.attn.ob"), 1, h),
        })
        .collect();
    let lat_w1 = add("lattice_head.w1".into(), h, h);
    let lat_b1 = add("lattice_head.b1".into(), 1, h);
    let lat_w2 = add("lattice_head.w2".into(), h, 6);
    let lat_b2 = add("lattice_head.b2".into(), 1, 6);
    let crd_w1 = add("coord_head.w1".into(), h, h);
    let crd_b1 = add("coord_head.b1".into(), 1, h);
    let crd_w2 = add("coord_head.w2".into(), h, 3);
    let crd_b2 = add("coord_head.b2".into(), 1, 3);
    let ids = ParamIds {
        atom_emb,
        p_w1,
        p_b1,
        p_w2,
        p_b2,
        in_w,
        in_b,
        layers,
        lat_w1,
        lat_b1,
        lat_w2,
        lat_b2,
        crd_w1,
        crd_b1,
        crd_w2,
        crd_b2,
    };
    (specs, ids)
}

/// Trainable denoiser weights plus the conditioning they were trained for.
#[derive(Debug, Clone)]
pub struct DenoiserParams {
    pub config: ModelConfig,
    pub property: PropertyKind,
    pub rbf: RbfGrid,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    ids: ParamIds,
}

impl DenoiserParams {
    /// Random initialisation: weights `N(0, 1/fan_in)`, output heads scaled
    /// by 0.1, biases zero, atom embeddings `N(0, 1)`.
    pub fn init(config: ModelConfig, property: PropertyKind, rbf: RbfGrid, seed: u64) -> Result<Self, DiffusionError> {
        config.validate()?;
        rbf.validate()?;
        if rbf.len() != config.rbf_centers {
            return Err(DiffusionError::Config(format!(
                "RBF grid has {} centres, model expects {}",
                rbf.len(),
                config.rbf_centers
            )));
        }
        let (specs, ids) = layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (name, r, c) in specs {
            let t = if r == 1 && name.contains(".b") || name.ends_with(".ob") {
                Tensor::zeros(r, c)
            } else {
                let std = if name == "atom_embedding" {
                    1.0
                } else if name == "lattice_head.w2" || name == "coord_head.w2" {
                    0.1 / (r as f64).sqrt()
                } else {
                    1.0 / (r as f64).sqrt()
                };
                let dist = Normal::new(0.0, std).expect("finite std");
                Tensor::from_vec(r, c, (0..r * c).map(|_| dist.sample(&mut rng)).collect())
            };
            names.push(name);
            tensors.push(t);
        }
        Ok(Self { config, property, rbf, names, tensors, ids })
    }

    /// Rebuilds parameters from named tensors, checking names and shapes.
    pub fn from_named(
        config: ModelConfig,
        property: PropertyKind,
        rbf: RbfGrid,
        named: Vec<(String, Tensor)>,
    ) -> Result<Self, DiffusionError> {
        config.validate()?;
        rbf.validate()?;
        let (specs, ids) = layout(&config);
        if specs.len() != named.len() {
            return Err(DiffusionError::Checkpoint(format!("expected {} tensors, found {}", specs.len(), named.len())));
        }
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for ((name, r, c), (n2, t)) in specs.into_iter().zip(named) {
            if name != n2 || t.shape() != (r, c) || t.data.len() != r * c {
                return Err(DiffusionError::Checkpoint(format!(
                    "tensor {n2} {:?} does not match expected {name} ({r}, {c})",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(DiffusionError::Checkpoint(format!("tensor {name} has non-finite values")));
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(Self { config, property, rbf, names, tensors, ids })
    }

    pub fn named_tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    fn check_kind(&self, p: &PropertyTarget) -> Result<(), DiffusionError> {
        if p.kind != self.property {
            return Err(DiffusionError::InvalidInput(format!(
                "model conditioned on {}, request gives {}",
                self.property, p.kind
            )));
        }
        Ok(())
    }
}

/// Denoiser outputs: lattice noise and per-site free-parameter noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserOutput {
    pub eps_k: Vec<f64>,
    pub eps_f: Vec<[f64; 3]>,
}

/// Constant inputs of one forward pass.
pub(crate) struct Prepared {
    species_idx: Vec<usize>,
    lattice: [f64; LATTICE_FEATURES],
    psi: Tensor,
    projection: Tensor,
    pub(crate) mask: Tensor,
    n_atoms: usize,
    n_sites: usize,
    dof: usize,
}

fn species_indices(species: &[String]) -> Result<Vec<usize>, DiffusionError> {
    species
        .iter()
        .map(|s| {
            elements::index_of(s)
                .ok_or_else(|| DiffusionError::Symmetry(crate::error::SymmetryError::UnknownSpecies(s.clone())))
        })
        .collect()
}

pub(crate) fn positions_of<'a>(constraint: &SymmetryConstraint) -> Result<Vec<&'a WyckoffPosition>, DiffusionError> {
    let table = WyckoffTable::global();
    constraint
        .assignments
        .iter()
        .map(|a| table.position(constraint.space_group, a.letter).map_err(DiffusionError::from))
        .collect()
}

impl Prepared {
    pub(crate) fn new(
        config: &ModelConfig,
        constraint: &SymmetryConstraint,
        k: &[f64],
        f: &[[f64; 3]],
    ) -> Result<Self, DiffusionError> {
        let sg = constraint.space_group;
        let dof = lattice_dof(sg);
        if k.len() != dof {
            return Err(DiffusionError::Config(format!("lattice DOF length {} but group {sg} needs {dof}", k.len())));
        }
        let positions = positions_of(constraint)?;
        if f.len() != positions.len() {
            return Err(DiffusionError::Config(format!(
                "{} free-coordinate triples for {} sites",
                f.len(),
                positions.len()
            )));
        }
        let mut species = Vec::new();
        let mut coords = Vec::new();
        let mut owner = Vec::new();
        for (s, (a, w)) in constraint.assignments.iter().zip(&positions).enumerate() {
            let p = w.mask(f[s]);
            for m in &w.orbit_maps {
                species.push(a.element.clone());
                coords.push(wrap3(m.apply(p)));
                owner.push((s, m.linear(), w.multiplicity));
            }
        }
        let n = species.len();
        let n_sites = positions.len();
        let kk = config.fourier_k;
        let mut psi = Tensor::zeros(n * n, 3 * kk);
        for i in 0..n {
            for j in 0..n {
                let d = [coords[j][0] - coords[i][0], coords[j][1] - coords[i][1], coords[j][2] - coords[i][2]];
                let e = fourier_relative_embedding(d, kk)?;
                psi.data[(i * n + j) * 3 * kk..(i * n + j + 1) * 3 * kk].copy_from_slice(&e);
            }
        }
        // per-site output = mask ⊙ mean over orbit of Rᵀ · (atom output)
        let mut projection = Tensor::zeros(3 * n_sites, 3 * n);
        for (atom, (s, r, mult)) in owner.iter().enumerate() {
            for a in 0..3 {
                if !positions[*s].free_mask[a] {
                    continue;
                }
                for b in 0..3 {
                    let v = projection.get(3 * s + a, 3 * atom + b) + r[b][a] / *mult as f64;
                    projection.set(3 * s + a, 3 * atom + b, v);
                }
            }
        }
        let mut mask = Tensor::zeros(n_sites, 3);
        for (s, w) in positions.iter().enumerate() {
            for a in 0..3 {
                if w.free_mask[a] {
                    mask.set(s, a, 1.0);
                }
            }
        }
        Ok(Self {
            species_idx: species_indices(&species)?,
            lattice: lattice_features(k, sg),
            psi,
            projection,
            mask,
            n_atoms: n,
            n_sites,
            dof,
        })
    }
}

pub(crate) struct Graph {
    pub eps_k: Var,
    pub eps_f: Var,
    pub params: Vec<Var>,
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Var {
    let y = tape.matmul(x, w);
    tape.add_row(y, b)
}

/// Input features on the tape from parameter leaves.
fn features_graph(
    tape: &mut Tape,
    params: &DenoiserParams,
    pv: &[Var],
    species_idx: &[usize],
    rbf: &[f64],
    time: &[f64],
) -> Var {
    let ids = &params.ids;
    let n = species_idx.len();
    let atom = tape.gather_rows(pv[ids.atom_emb], species_idx.to_vec());
    let r = tape.leaf(Tensor::row_vector(rbf.to_vec()));
    let h = linear(tape, r, pv[ids.p_w1], pv[ids.p_b1]);
    let h = tape.silu(h);
    let prop = linear(tape, h, pv[ids.p_w2], pv[ids.p_b2]);
    let prop = tape.gather_rows(prop, vec![0; n]);
    let mut trows = Vec::with_capacity(n * time.len());
    for _ in 0..n {
        trows.extend_from_slice(time);
    }
    let tfeat = tape.leaf(Tensor::from_vec(n, time.len(), trows));
    let x = tape.concat_cols(&[atom, prop, tfeat]);
    linear(tape, x, pv[ids.in_w], pv[ids.in_b])
}

fn decoder_graph(tape: &mut Tape, params: &DenoiserParams, pv: &[Var], c0: Var, prep: &Prepared) -> (Var, Var) {
    let cfg = &params.config;
    let ids = &params.ids;
    let n = prep.n_atoms;
    let h = cfg.hidden;
    let head = h / cfg.n_heads;
    let is: Vec<usize> = (0..n * n).map(|r| r / n).collect();
    let js: Vec<usize> = (0..n * n).map(|r| r % n).collect();
    let mut lat = Vec::with_capacity(n * n * LATTICE_FEATURES);
    for _ in 0..n * n {
        lat.extend_from_slice(&prep.lattice);
    }
    let lat = tape.leaf(Tensor::from_vec(n * n, LATTICE_FEATURES, lat));
    let psi = tape.leaf(prep.psi.clone());
    let mut c = c0;
    for l in &ids.layers {
        let ci = tape.gather_rows(c, is.clone());
        let cj = tape.gather_rows(c, js.clone());
        let x = tape.concat_cols(&[ci, cj, lat, psi]);
        let m = linear(tape, x, pv[l.e_w1], pv[l.e_b1]);
        let m = tape.silu(m);
        let m = linear(tape, m, pv[l.e_w2], pv[l.e_b2]);
        let m = tape.silu(m);
        let agg = tape.sum_groups(m, is.clone(), n);
        // queries from node features, keys/values from aggregated messages
        let q = tape.matmul(c, pv[l.q]);
        let k = tape.matmul(agg, pv[l.k]);
        let v = tape.matmul(agg, pv[l.v]);
        let mut heads = Vec::with_capacity(cfg.n_heads);
        for hd in 0..cfg.n_heads {
            let qh = tape.slice_cols(q, hd * head, head);
            let kh = tape.slice_cols(k, hd * head, head);
            let vh = tape.slice_cols(v, hd * head, head);
            let s = tape.matmul_nt(qh, kh);
            let s = tape.scale(s, 1.0 / (head as f64).sqrt());
            let a = tape.softmax_rows(s);
            heads.push(tape.matmul(a, vh));
        }
        let o = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
        let o = linear(tape, o, pv[l.o], pv[l.ob]);
        c = tape.add(c, o);
    }
    let pooled = tape.sum_groups(c, vec![0; n], 1);
    let pooled = tape.scale(pooled, 1.0 / n as f64);
    let lh = linear(tape, pooled, pv[ids.lat_w1], pv[ids.lat_b1]);
    let lh = tape.silu(lh);
    let lh = linear(tape, lh, pv[ids.lat_w2], pv[ids.lat_b2]);
    let eps_k = tape.slice_cols(lh, 0, prep.dof);
    let ch = linear(tape, c, pv[ids.crd_w1], pv[ids.crd_b1]);
    let ch = tape.silu(ch);
    let ch = linear(tape, ch, pv[ids.crd_w2], pv[ids.crd_b2]);
    let site = tape.linear_const(ch, prep.projection.clone(), prep.n_sites, 3);
    let eps_f = tape.mul_const(site, prep.mask.clone());
    (eps_k, eps_f)
}

fn param_leaves(tape: &mut Tape, params: &DenoiserParams) -> Vec<Var> {
    params.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
}

/// Full graph from parameters: features, decoder and heads.
pub(crate) fn full_graph(
    tape: &mut Tape,
    params: &DenoiserParams,
    prep: &Prepared,
    p: &PropertyTarget,
    t: usize,
) -> Result<Graph, DiffusionError> {
    params.check_kind(p)?;
    let rbf = rbf_property_embedding(p.value, &params.rbf)?;
    let time = sinusoidal_time_embedding(t, params.config.time_dim)?;
    let pv = param_leaves(tape, params);
    let c0 = features_graph(tape, params, &pv, &prep.species_idx, &rbf, &time);
    let (eps_k, eps_f) = decoder_graph(tape, params, &pv, c0, prep);
    Ok(Graph { eps_k, eps_f, params: pv })
}

fn read_output(tape: &Tape, eps_k: Var, eps_f: Var) -> DenoiserOutput {
    let k = tape.value(eps_k).data.clone();
    let f = tape.value(eps_f);
    DenoiserOutput { eps_k: k, eps_f: (0..f.rows).map(|r| [f.get(r, 0), f.get(r, 1), f.get(r, 2)]).collect() }
}

/// Per-atom input features `C = φ_in([f_atom(A), f_prop(p), f_time(t)])`.
pub fn build_input_features(
    params: &DenoiserParams,
    species: &[String],
    p: &PropertyTarget,
    t: usize,
) -> Result<Tensor, DiffusionError> {
    params.check_kind(p)?;
    let idx = species_indices(species)?;
    let rbf = rbf_property_embedding(p.value, &params.rbf)?;
    let time = sinusoidal_time_embedding(t, params.config.time_dim)?;
    let mut tape = Tape::new();
    let pv = param_leaves(&mut tape, params);
    let c = features_graph(&mut tape, params, &pv, &idx, &rbf, &time);
    Ok(tape.value(c).clone())
}

/// Runs the decoder on precomputed input features `c0` (one row per atom of
/// the expanded constraint).
pub fn denoiser_forward(
    params: &DenoiserParams,
    c0: &Tensor,
    k: &LatticeDof,
    f: &[[f64; 3]],
    constraint: &SymmetryConstraint,
) -> Result<DenoiserOutput, DiffusionError> {
    let prep = Prepared::new(&params.config, constraint, &k.values, f)?;
    if c0.shape() != (prep.n_atoms, params.config.hidden) {
        return Err(DiffusionError::Config(format!(
            "input features {:?} but expected ({}, {})",
            c0.shape(),
            prep.n_atoms,
            params.config.hidden
        )));
    }
    let mut tape = Tape::new();
    let pv = param_leaves(&mut tape, params);
    let c = tape.leaf(c0.clone());
    let (eps_k, eps_f) = decoder_graph(&mut tape, params, &pv, c, &prep);
    Ok(read_output(&tape, eps_k, eps_f))
}

/// Features plus decoder in one call.
pub fn predict(
    params: &DenoiserParams,
    constraint: &SymmetryConstraint,
    k: &LatticeDof,
    f: &[[f64; 3]],
    t: usize,
    p: &PropertyTarget,
) -> Result<DenoiserOutput, DiffusionError> {
    let prep = Prepared::new(&params.config, constraint, &k.values, f)?;
    let mut tape = Tape::new();
    let g = full_graph(&mut tape, params, &prep, p, t)?;
    Ok(read_output(&tape, g.eps_k, g.eps_f))
}
