//! Fixed feature expansions: property RBF grid, timestep and relative
//! fractional-coordinate encodings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::DiffusionError;

/// Gaussian RBF grid over a property range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfGrid {
    pub p_min: f64,
    pub p_max: f64,
    pub sigma: f64,
}

impl RbfGrid {
    pub fn new(p_min: f64, p_max: f64, sigma: f64) -> Result<Self, DiffusionError> {
        let g = Self { p_min, p_max, sigma };
        g.validate()?;
        Ok(g)
    }

    /// Grid with `centers` evenly spaced centres spanning `[p_min, p_max]`.
    pub fn with_centers(p_min: f64, p_max: f64, centers: usize) -> Result<Self, DiffusionError> {
        if centers < 2 {
            return Err(DiffusionError::Config("RBF grid needs at least 2 centres".into()));
        }
        Self::new(p_min, p_max, (p_max - p_min) / (centers - 1) as f64)
    }

    /// Grid fitted to observed values with 128 centres. A degenerate range is
    /// widened to ±0.5 around its value.
    pub fn fit(values: &[f64], centers: usize) -> Result<Self, DiffusionError> {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(DiffusionError::InvalidInput("no finite property values".into()));
        }
        let (lo, hi) = if hi - lo < 1e-6 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        Self::with_centers(lo, hi, centers)
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        if !(self.p_min.is_finite() && self.p_max.is_finite() && self.p_min < self.p_max) {
            return Err(DiffusionError::Config(format!("need p_min < p_max, got {} and {}", self.p_min, self.p_max)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(DiffusionError::Config(format!("RBF spacing must be positive, got {}", self.sigma)));
        }
        if self.len() < 2 {
            return Err(DiffusionError::Config("RBF spacing leaves fewer than 2 centres".into()));
        }
        Ok(())
    }

    /// Number of centres, `floor((p_max - p_min) / sigma) + 1`.
    pub fn len(&self) -> usize {
        // the small slack absorbs rounding when sigma was derived from the span
        ((self.p_max - self.p_min) / self.sigma + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Expands `p` over the grid: `exp(-(p - p_min - j·σ)² / (2σ²))`, j = 0..=m.
/// Values outside the range are not clamped.
pub fn rbf_property_embedding(p: f64, grid: &RbfGrid) -> Result<Vec<f64>, DiffusionError> {
    if !p.is_finite() {
        return Err(DiffusionError::InvalidInput(format!("property value {p} is not finite")));
    }
    grid.validate()?;
    let s2 = 2.0 * grid.sigma * grid.sigma;
    Ok((0..grid.len())
        .map(|j| {
            let d = p - grid.p_min - j as f64 * grid.sigma;
            (-d * d / s2).exp()
        })
        .collect())
}

/// Transformer-style timestep embedding: pairs `(sin(t·w_i), cos(t·w_i))`
/// with `w_i = 10000^(-2i/dim)`.
pub fn sinusoidal_time_embedding(t: usize, dim: usize) -> Result<Vec<f64>, DiffusionError> {
    if dim == 0 || dim % 2 != 0 {
        return Err(DiffusionError::Config(format!("time embedding dim must be even and positive, got {dim}")));
    }
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let w = 10000f64.powf(-(2.0 * i as f64) / dim as f64);
        let a = t as f64 * w;
        out.push(a.sin());
        out.push(a.cos());
    }
    Ok(out)
}

/// Periodic encoding of a relative fractional displacement: per axis,
/// `(sin 2πmx, cos 2πmx)` for `m = 1..=K/2`. Output length `3K`.
pub fn fourier_relative_embedding(delta: [f64; 3], k: usize) -> Result<Vec<f64>, DiffusionError> {
    if k == 0 || k % 2 != 0 {
        return Err(DiffusionError::Config(format!("Fourier basis count must be even and positive, got {k}")));
    }
    let mut out = Vec::with_capacity(3 * k);
    for x in delta {
        // reduce first so large integer offsets do not lose precision
        let x = x - x.round();
        for m in 1..=k / 2 {
            let a = 2.0 * PI * m as f64 * x;
            out.push(a.sin());
            out.push(a.cos());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_values() {
        let g = RbfGrid::new(-1.0, 3.0, 0.5).unwrap();
        let v = rbf_property_embedding(-1.0, &g).unwrap();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], 1.0);
        let v = rbf_property_embedding(-0.5, &g).unwrap();
        assert!((v[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v[0] - 0.60653).abs() < 1e-5);
        // out of range is allowed
        assert!(rbf_property_embedding(100.0, &g).unwrap().iter().all(|x| *x >= 0.0));
        assert!(rbf_property_embedding(f64::NAN, &g).is_err());
    }

    #[test]
    fn rbf_grid_rules() {
        assert!(RbfGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(RbfGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(RbfGrid::new(0.0, 1.0, 1.5).is_err());
        assert_eq!(RbfGrid::new(0.0, 1.0, 0.75).unwrap().len(), 2);
        let g = RbfGrid::with_centers(-4.0, 2.5, 128).unwrap();
        assert_eq!(g.len(), 128);
        let g = RbfGrid::fit(&[0.7], 128).unwrap();
        assert!((g.p_min - 0.2).abs() < 1e-12 && (g.p_max - 1.2).abs() < 1e-12);
        assert_eq!(g.len(), 128);
    }

    #[test]
    fn time_embedding() {
        let e = sinusoidal_time_embedding(0, 8).unwrap();
        for i in 0..4 {
            assert_eq!(e[2 * i], 0.0);
            assert_eq!(e[2 * i + 1], 1.0);
        }
        assert!(sinusoidal_time_embedding(5, 7).is_err());
        assert!(sinusoidal_time_embedding(999, 16).unwrap().iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn fourier_embedding() {
        let z = fourier_relative_embedding([0.0; 3], 4).unwrap();
        assert_eq!(z.len(), 12);
        for (i, v) in z.iter().enumerate() {
            assert_eq!(*v, if i % 2 == 0 { 0.0 } else { 1.0 });
        }
        let a = fourier_relative_embedding([0.13, -0.71, 0.5], 8).unwrap();
        let b = fourier_relative_embedding([1.13, 0.29, 1.5], 8).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(fourier_relative_embedding([0.0; 3], 3).is_err());
    }
}
