//! Noise schedules and the closed-form forward processes for both channels.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::DiffusionError;
use crate::symmetry::{wrap_unit, WyckoffPosition};

/// Image shifts used by the truncated wrapped-normal sums.
pub const WRAP_SHIFTS: i32 = 3;

/// Discrete schedule: `beta` drives the lattice channel (DDPM), `sigma` the
/// wrapped-normal coordinate channel. Both are indexed by `t = 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(skip)]
    alpha_bar: Vec<f64>,
}

/// Parameters that generate a [`NoiseSchedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { steps: 1000, beta_start: 1e-4, beta_end: 0.02, sigma_min: 0.005, sigma_max: 0.5 }
    }
}

impl ScheduleConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps, ..Self::default() }
    }

    /// Linear beta, geometric sigma.
    pub fn build(&self) -> Result<NoiseSchedule, DiffusionError> {
        let n = self.steps;
        if n < 2 {
            return Err(DiffusionError::Config("schedule needs at least 2 steps".into()));
        }
        let frac = |t: usize| t as f64 / (n - 1) as f64;
        let beta = (0..n).map(|t| self.beta_start + (self.beta_end - self.beta_start) * frac(t)).collect();
        let sigma = (0..n).map(|t| self.sigma_min * (self.sigma_max / self.sigma_min).powf(frac(t))).collect();
        NoiseSchedule::new(beta, sigma)
    }
}

impl NoiseSchedule {
    pub fn new(beta: Vec<f64>, sigma: Vec<f64>) -> Result<Self, DiffusionError> {
        if beta.len() != sigma.len() || beta.is_empty() {
            return Err(DiffusionError::Config("beta and sigma must have the same non-zero length".into()));
        }
        if !beta.iter().all(|b| *b > 0.0 && *b < 1.0) {
            return Err(DiffusionError::Config("beta values must lie in (0, 1)".into()));
        }
        if !sigma.iter().all(|s| *s > 0.0 && s.is_finite()) || !sigma.windows(2).all(|w| w[0] < w[1]) {
            return Err(DiffusionError::Config("sigma must be positive and strictly increasing".into()));
        }
        let mut s = Self { beta, sigma, alpha_bar: Vec::new() };
        s.rebuild();
        Ok(s)
    }

    fn rebuild(&mut self) {
        let mut acc = 1.0;
        self.alpha_bar = self
            .beta
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
    }

    /// Restores derived quantities after deserialization.
    pub fn validated(self) -> Result<Self, DiffusionError> {
        Self::new(self.beta, self.sigma)
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, t: usize) -> Result<usize, DiffusionError> {
        if t == 0 || t > self.steps() {
            Err(DiffusionError::TimestepOutOfRange { t, max: self.steps() })
        } else {
            Ok(t - 1)
        }
    }

    pub fn beta_at(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    /// Coordinate noise scale; `sigma(0) = 0`.
    pub fn sigma_at(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.sigma[t - 1]
        }
    }
}

/// DDPM closed form `k_t = √ᾱ·k0 + √(1−ᾱ)·ε`. Returns `(k_t, ε)`.
pub fn forward_noise_lattice<R: Rng + ?Sized>(
    k0: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), DiffusionError> {
    schedule.check(t)?;
    let eps: Vec<f64> = k0.iter().map(|_| rng.sample(StandardNormal)).collect();
    Ok((noise_lattice_with(k0, &eps, t, schedule), eps))
}

/// Forward lattice noising with a given `ε`.
pub fn noise_lattice_with(k0: &[f64], eps: &[f64], t: usize, schedule: &NoiseSchedule) -> Vec<f64> {
    let ab = schedule.alpha_bar(t);
    k0.iter().zip(eps).map(|(k, e)| ab.sqrt() * k + (1.0 - ab).sqrt() * e).collect()
}

/// Gradient in `x` of `log Σ_k exp(-(x - mu + k)² / (2σ²))`, k in ±`WRAP_SHIFTS`.
pub fn wrapped_normal_score(x: f64, mu: f64, sigma: f64) -> f64 {
    let d = x - mu;
    let d = d - d.round();
    let s2 = sigma * sigma;
    let terms: Vec<(f64, f64)> = (-WRAP_SHIFTS..=WRAP_SHIFTS)
        .map(|k| {
            let r = d + k as f64;
            (-r * r / (2.0 * s2), -r / s2)
        })
        .collect();
    let m = terms.iter().map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
    let (num, den) = terms.iter().fold((0.0, 0.0), |(n, d), (l, g)| {
        let w = (l - m).exp();
        (n + w * g, d + w)
    });
    num / den
}

/// Truncated wrapped-normal log-density, up to an additive constant.
pub fn wrapped_normal_log_density(x: f64, mu: f64, sigma: f64) -> f64 {
    let d = x - mu;
    let d = d - d.round();
    let ls: Vec<f64> = (-WRAP_SHIFTS..=WRAP_SHIFTS).map(|k| -(d + k as f64).powi(2) / (2.0 * sigma * sigma)).collect();
    let m = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + ls.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Wrapped-normal perturbation of the free entries of each site's
/// parameters. Returns the noised parameters and the score of the
/// transition density at them; masked entries stay 0 in both.
pub fn forward_noise_coords<R: Rng + ?Sized>(
    f0: &[[f64; 3]],
    positions: &[&WyckoffPosition],
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>), DiffusionError> {
    schedule.check(t)?;
    if f0.len() != positions.len() {
        return Err(DiffusionError::InvalidInput(format!(
            "{} coordinate triples for {} sites",
            f0.len(),
            positions.len()
        )));
    }
    let sigma = schedule.sigma_at(t);
    let mut ft = Vec::with_capacity(f0.len());
    let mut score = Vec::with_capacity(f0.len());
    for (p, w) in f0.iter().zip(positions) {
        let mut x = [0.0; 3];
        let mut s = [0.0; 3];
        for k in 0..3 {
            if w.free_mask[k] {
                let e: f64 = rng.sample(StandardNormal);
                x[k] = wrap_unit(p[k] + sigma * e);
                s[k] = wrapped_normal_score(x[k], p[k], sigma);
            }
        }
        ft.push(x);
        score.push(s);
    }
    Ok((ft, score))
}
