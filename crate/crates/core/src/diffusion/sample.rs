//! Reverse diffusion: ancestral lattice steps and wrapped score steps on
//! Wyckoff free parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::lattice_code::{LatticeDof, CODE_CLIP};
use super::model::{positions_of, predict, DenoiserParams};
use super::schedule::NoiseSchedule;
use crate::error::DiffusionError;
use crate::par::{derive_seed, Execution};
use crate::property::PropertyTarget;
use crate::symmetry::{lattice_dof, realize_structure, wrap_unit, CrystalStructure, SymmetryConstraint};

/// Resamples allowed after a degenerate draw.
pub const DEFAULT_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleConfig {
    pub retries: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { retries: DEFAULT_RETRIES }
    }
}

/// One generation request.
#[derive(Debug, Clone)]
pub struct SampleRequest {
    pub constraint: SymmetryConstraint,
    pub property: PropertyTarget,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Runs the reverse chain once and returns the final lattice code and free
/// parameters, without decoding.
pub fn reverse_chain<R: Rng + ?Sized>(
    params: &DenoiserParams,
    constraint: &SymmetryConstraint,
    p: &PropertyTarget,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<(LatticeDof, Vec<[f64; 3]>), DiffusionError> {
    constraint.validate()?;
    let positions = positions_of(constraint)?;
    let dof = lattice_dof(constraint.space_group);
    let mut k = LatticeDof { values: (0..dof).map(|_| normal(rng)).collect() };
    let mut f: Vec<[f64; 3]> = positions
        .iter()
        .map(|w| {
            let mut x = [0.0; 3];
            for (a, xa) in x.iter_mut().enumerate() {
                if w.free_mask[a] {
                    *xa = rng.random::<f64>();
                }
            }
            x
        })
        .collect();
    for t in (1..=schedule.steps()).rev() {
        let out = predict(params, constraint, &k, &f, t, p)?;
        let ab = schedule.alpha_bar(t);
        let ab_prev = schedule.alpha_bar(t - 1);
        let beta = schedule.beta_at(t);
        let alpha = 1.0 - beta;
        let var = beta * (1.0 - ab_prev) / (1.0 - ab);
        for (kv, e) in k.values.iter_mut().zip(&out.eps_k) {
            let x0 = ((*kv - (1.0 - ab).sqrt() * e) / ab.sqrt()).clamp(-CODE_CLIP, CODE_CLIP);
            let mean = ab_prev.sqrt() * beta / (1.0 - ab) * x0 + alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab) * *kv;
            *kv = if t > 1 { mean + var.sqrt() * normal(rng) } else { mean };
        }
        let s = schedule.sigma_at(t);
        let s_prev = schedule.sigma_at(t - 1);
        let step = s * s - s_prev * s_prev;
        for (site, (w, e)) in f.iter_mut().zip(positions.iter().zip(&out.eps_f)) {
            for a in 0..3 {
                if !w.free_mask[a] {
                    continue;
                }
                let score = e[a] / s;
                let mut x = site[a] + step * score;
                if t > 1 {
                    x += step.sqrt() * normal(rng);
                }
                site[a] = wrap_unit(x);
            }
        }
    }
    Ok((k, f))
}

/// Samples one structure satisfying `constraint`. Degenerate draws are
/// resampled up to `config.retries` times.
pub fn sample<R: Rng + ?Sized>(
    params: &DenoiserParams,
    constraint: &SymmetryConstraint,
    p: &PropertyTarget,
    schedule: &NoiseSchedule,
    config: SampleConfig,
    rng: &mut R,
) -> Result<CrystalStructure, DiffusionError> {
    let attempts = config.retries + 1;
    for attempt in 0..attempts {
        let (k, f) = reverse_chain(params, constraint, p, schedule, rng)?;
        let lattice = match k.decode(constraint.space_group) {
            Ok(l) => l,
            Err(e) => {
                log::debug!("attempt {attempt}: degenerate lattice ({e})");
                continue;
            }
        };
        match realize_structure(constraint, &lattice, &f) {
            Ok(s) => return Ok(s),
            Err(e) => log::debug!("attempt {attempt}: invalid structure ({e})"),
        }
    }
    Err(DiffusionError::SamplingFailure(attempts))
}

/// Samples every request with its own RNG stream derived from `seed`, so
/// results do not depend on the execution mode.
pub fn sample_batch(
    params: &DenoiserParams,
    requests: &[SampleRequest],
    schedule: &NoiseSchedule,
    config: SampleConfig,
    seed: u64,
    exec: Execution,
) -> Vec<Result<CrystalStructure, DiffusionError>> {
    exec.map_indexed(requests, |i, r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("sample/{i}")));
        sample(params, &r.constraint, &r.property, schedule, config, &mut rng)
    })
}
