//! Denoising-objective training with Adam and a plateau learning-rate schedule.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedding::RbfGrid;
use super::lattice_code::LatticeDof;
use super::model::{full_graph, positions_of, DenoiserParams, ModelConfig, Prepared};
use super::schedule::{forward_noise_coords, forward_noise_lattice, NoiseSchedule, ScheduleConfig};
use super::tensor::{Tape, Tensor};
use crate::error::DiffusionError;
use crate::property::{PropertyKind, PropertyTarget};
use crate::symmetry::{
    crystal_system_of, periodic_max_distance, project_lattice, satisfies_class, CrystalStructure, LatticeParameters,
    SymmetryConstraint,
};

/// Maximum per-axis deviation tolerated between a site and its regenerated orbit.
pub const SITE_CONSISTENCY_TOL: f64 = 1e-4;

/// A structure with its symmetry constraint and property value.
#[derive(Debug, Clone)]
pub struct TrainingRecord {
    pub id: String,
    pub structure: CrystalStructure,
    pub constraint: SymmetryConstraint,
    pub property: f64,
}

/// A training structure reduced to the constraint's coordinates.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub id: String,
    pub constraint: SymmetryConstraint,
    pub lattice: LatticeParameters,
    pub k0: LatticeDof,
    pub free_params: Vec<[f64; 3]>,
    pub property: f64,
}

impl TrainingExample {
    /// Reduces a record. Sites must be grouped by assignment, in assignment
    /// order, and carry the assignment's Wyckoff letter.
    pub fn from_record(rec: &TrainingRecord) -> Result<Self, String> {
        let c = &rec.constraint;
        c.validate().map_err(|e| e.to_string())?;
        if !rec.property.is_finite() {
            return Err("property value is not finite".into());
        }
        let s = &rec.structure;
        let letters = s.wyckoff_letters.as_ref().ok_or("structure has no per-site Wyckoff letters")?;
        if *letters != c.expanded_letters() {
            return Err("per-site Wyckoff letters do not match the constraint expansion".into());
        }
        if s.species != c.expanded_species() {
            return Err("species do not match the constraint expansion".into());
        }
        let params = s.parameters();
        let system = crystal_system_of(c.space_group);
        if !satisfies_class(&params, system, 1e-6) {
            return Err(format!("lattice does not satisfy the {system:?} class"));
        }
        let lattice = project_lattice(&params, c.space_group).map_err(|e| e.to_string())?;
        let positions = positions_of(c).map_err(|e| e.to_string())?;
        let mut free_params = Vec::with_capacity(positions.len());
        let mut start = 0;
        for w in positions {
            let block = &s.frac_coords[start..start + w.multiplicity];
            let (p, _) = w.fit(block[0]);
            let orbit = w.orbit(p).map_err(|e| e.to_string())?;
            for site in block {
                let d = orbit.iter().map(|o| periodic_max_distance(*o, *site)).fold(f64::INFINITY, f64::min);
                if d > SITE_CONSISTENCY_TOL {
                    return Err(format!("site {site:?} is {d:.2e} away from its Wyckoff {} orbit", w.letter));
                }
            }
            free_params.push(p);
            start += w.multiplicity;
        }
        Ok(Self {
            id: rec.id.clone(),
            constraint: c.clone(),
            lattice,
            k0: LatticeDof::encode(&lattice, c.space_group),
            free_params,
            property: rec.property,
        })
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Noised copies of each example per step.
    pub noise_draws: usize,
    pub learning_rate: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::full(),
            schedule: ScheduleConfig::default(),
            epochs: 1000,
            batch_size: 32,
            noise_draws: 1,
            learning_rate: 1e-3,
            plateau_factor: 0.6,
            plateau_patience: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn tiny() -> Self {
        Self { model: ModelConfig::tiny(), epochs: 500, noise_draws: 32, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// Learning rate in effect after this epoch's scheduler step.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: DenoiserParams,
    pub schedule: NoiseSchedule,
    pub trace: Vec<EpochStats>,
}

/// One noised draw of a training example.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisedSample {
    pub t: usize,
    pub k_t: Vec<f64>,
    pub eps_k: Vec<f64>,
    pub f_t: Vec<[f64; 3]>,
    pub score: Vec<[f64; 3]>,
}

pub fn draw_noised_sample<R: Rng + ?Sized>(
    ex: &TrainingExample,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<NoisedSample, DiffusionError> {
    let t = rng.random_range(1..=schedule.steps());
    let (k_t, eps_k) = forward_noise_lattice(&ex.k0.values, t, schedule, rng)?;
    let positions = positions_of(&ex.constraint)?;
    let (f_t, score) = forward_noise_coords(&ex.free_params, &positions, t, schedule, rng)?;
    Ok(NoisedSample { t, k_t, eps_k, f_t, score })
}

fn loss_graph(
    params: &DenoiserParams,
    ex: &TrainingExample,
    s: &NoisedSample,
    schedule: &NoiseSchedule,
) -> Result<(Tape, super::tensor::Var, Vec<super::tensor::Var>), DiffusionError> {
    let prep = Prepared::new(&params.config, &ex.constraint, &s.k_t, &s.f_t)?;
    let mut tape = Tape::new();
    let p = PropertyTarget::new(params.property, ex.property);
    let g = full_graph(&mut tape, params, &prep, &p, s.t)?;
    let dof = s.eps_k.len();
    let lat = tape.weighted_sse(
        g.eps_k,
        Tensor::row_vector(s.eps_k.clone()),
        Tensor::row_vector(vec![1.0 / dof as f64; dof]),
    );
    let active: f64 = prep.mask.data.iter().sum();
    let loss = if active > 0.0 {
        // the coordinate head predicts σ_t-scaled scores
        let sigma = schedule.sigma_at(s.t);
        let target = Tensor::from_vec(s.score.len(), 3, s.score.iter().flat_map(|r| r.map(|v| v * sigma)).collect());
        let mut w = prep.mask.clone();
        w.data.iter_mut().for_each(|v| *v /= active);
        let crd = tape.weighted_sse(g.eps_f, target, w);
        tape.add(lat, crd)
    } else {
        lat
    };
    Ok((tape, loss, g.params))
}

/// Denoising loss of one noised draw.
pub fn sample_loss(
    params: &DenoiserParams,
    ex: &TrainingExample,
    s: &NoisedSample,
    schedule: &NoiseSchedule,
) -> Result<f64, DiffusionError> {
    let (tape, loss, _) = loss_graph(params, ex, s, schedule)?;
    Ok(tape.value(loss).data[0])
}

/// Loss and its gradient with respect to every parameter tensor.
pub fn sample_loss_and_grad(
    params: &DenoiserParams,
    ex: &TrainingExample,
    s: &NoisedSample,
    schedule: &NoiseSchedule,
) -> Result<(f64, Vec<Tensor>), DiffusionError> {
    let (tape, loss, pv) = loss_graph(params, ex, s, schedule)?;
    let mut grads = tape.backward(loss);
    let out = pv
        .iter()
        .zip(params.tensors())
        .map(|(v, t)| grads[v.index()].take().unwrap_or_else(|| Tensor::zeros(t.rows, t.cols)))
        .collect();
    Ok((tape.value(loss).data[0], out))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn update(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * gi;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Multiplies the learning rate by `factor` once the loss has failed to
/// improve on its best value for `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize) -> Self {
        Self { factor, patience, best: f64::INFINITY, bad_epochs: 0 }
    }

    /// Returns the (possibly reduced) learning rate.
    pub fn step(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.bad_epochs = 0;
            lr * self.factor
        } else {
            lr
        }
    }
}

/// Reduces and checks every record, collecting all failures.
pub fn prepare_examples(records: &[TrainingRecord]) -> Result<Vec<TrainingExample>, DiffusionError> {
    let mut ok = Vec::with_capacity(records.len());
    let mut bad = Vec::new();
    for r in records {
        match TrainingExample::from_record(r) {
            Ok(e) => ok.push(e),
            Err(msg) => bad.push(format!("{}: {msg}", r.id)),
        }
    }
    if !bad.is_empty() {
        return Err(DiffusionError::Validation(bad));
    }
    Ok(ok)
}

/// Trains a denoiser for one property kind. Runs on the calling thread.
pub fn train(
    records: &[TrainingRecord],
    kind: PropertyKind,
    config: &TrainConfig,
) -> Result<TrainedModel, DiffusionError> {
    if records.is_empty() {
        return Err(DiffusionError::InvalidInput("empty training set".into()));
    }
    if config.batch_size == 0 || config.noise_draws == 0 {
        return Err(DiffusionError::Config("batch size and noise draws must be positive".into()));
    }
    let examples = prepare_examples(records)?;
    let schedule = config.schedule.build()?;
    let values: Vec<f64> = examples.iter().map(|e| e.property).collect();
    let rbf = RbfGrid::fit(&values, config.model.rbf_centers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = DenoiserParams::init(config.model, kind, rbf, rng.random())?;
    let mut adam = Adam::new(params.tensors(), config.learning_rate);
    let mut plateau = PlateauScheduler::new(config.plateau_factor, config.plateau_patience);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut count = 0usize;
        for batch in order.chunks(config.batch_size) {
            let n = (batch.len() * config.noise_draws) as f64;
            let mut acc: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
            for &i in batch {
                for _ in 0..config.noise_draws {
                    let s = draw_noised_sample(&examples[i], &schedule, &mut rng)?;
                    let (loss, grads) = sample_loss_and_grad(&params, &examples[i], &s, &schedule)?;
                    epoch_loss += loss;
                    count += 1;
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        for (x, y) in a.data.iter_mut().zip(&g.data) {
                            *x += y / n;
                        }
                    }
                }
            }
            adam.update(params.tensors_mut(), &acc);
        }
        let loss = epoch_loss / count as f64;
        adam.lr = plateau.step(loss, adam.lr);
        trace.push(EpochStats { epoch, loss, lr: adam.lr });
        log::debug!("epoch {epoch}: loss {loss:.6} lr {:.2e}", adam.lr);
    }
    if !params.is_finite() {
        return Err(DiffusionError::InvalidInput("training diverged (non-finite weights)".into()));
    }
    Ok(TrainedModel { params, schedule, trace })
}
