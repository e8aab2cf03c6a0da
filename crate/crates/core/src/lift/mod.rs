//! Orientation-score construction on the lifted grid.
//!
//! Three routes produce the score W:
//! - [`lift_image`]: convolve a 2D image with anisotropic Gaussians, one per orientation bin;
//! - [`frangi_vesselness`] followed by [`lift_image`] for fundus-style images;
//! - [`build_ulm_score`]: histogram microbubble positions by velocity orientation.

pub mod conv;
mod frangi;
mod ulm;

pub use frangi::{frangi_vesselness, FrangiParams};
pub use ulm::{build_ulm_score, Trajectory, TrajectoryPoint};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, LiftedField};
use crate::raster::Raster;
use conv::FftConvolver;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiftKernelParams {
    /// Std along the orientation (pixels).
    pub sigma_long: f64,
    /// Std across the orientation (pixels).
    pub sigma_short: f64,
    /// Half-width of the square kernel support (pixels).
    pub support_radius: usize,
}

impl Default for LiftKernelParams {
    fn default() -> Self {
        LiftKernelParams {
            sigma_long: 6.0,
            sigma_short: 1.5,
            support_radius: 18,
        }
    }
}

impl LiftKernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_short > 0.0 && self.sigma_long > self.sigma_short) {
            return Err(Error::Config(format!(
                "need sigma_long > sigma_short > 0, got {} and {}",
                self.sigma_long, self.sigma_short
            )));
        }
        if (self.support_radius as f64) < 3.0 * self.sigma_long {
            return Err(Error::Config(format!(
                "support_radius {} is below 3·sigma_long = {}",
                self.support_radius,
                3.0 * self.sigma_long
            )));
        }
        Ok(())
    }

    /// Unit-mass kernel oriented at `theta`, `(2r+1)²` taps in row-major order.
    pub fn kernel(&self, theta: f64) -> Vec<f64> {
        let r = self.support_radius as isize;
        let (c, s) = (theta.cos(), theta.sin());
        let (al, as_) = (
            0.5 / (self.sigma_long * self.sigma_long),
            0.5 / (self.sigma_short * self.sigma_short),
        );
        let mut k = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
        for dy in -r..=r {
            for dx in -r..=r {
                let (px, py) = (dx as f64, dy as f64);
                let along = px * c + py * s;
                let across = px * s - py * c;
                k.push((-along * along * al - across * across * as_).exp());
            }
        }
        let total: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= total);
        k
    }
}

/// Result of min-max normalization.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub field: LiftedField,
    /// Set when the input was constant and the output is all zeros.
    pub degenerate: bool,
}

/// Affine rescaling of the whole field onto `[0, 1]`.
pub fn normalize_score(field: &LiftedField) -> Normalized {
    let (lo, hi) = field.min_max();
    if !(hi > lo) || !(hi - lo).is_finite() {
        return Normalized {
            field: LiftedField::zeros(*field.spec()),
            degenerate: true,
        };
    }
    let scale = 1.0 / (hi - lo);
    Normalized {
        field: field.map(|v| ((v - lo) * scale).clamp(0.0, 1.0)),
        degenerate: false,
    }
}

/// Orientation-wise convolutions without the final normalization.
pub fn lift_image_raw(image: &Raster, spec: &GridSpec, params: &LiftKernelParams) -> Result<LiftedField> {
    spec.validate()?;
    params.validate()?;
    if image.width != spec.width || image.height != spec.height {
        return Err(Error::Config(format!(
            "image is {}x{} but grid is {}x{}",
            image.width, image.height, spec.width, spec.height
        )));
    }
    if image.data.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Config("lift input must be finite and nonnegative".into()));
    }
    let r = params.support_radius;
    let conv = FftConvolver::new(image, r);
    let slices: Vec<Raster> = (0..spec.n_theta)
        .into_par_iter()
        .map(|k| conv.convolve(&params.kernel(spec.theta(k)), r))
        .collect();
    let mut out = LiftedField::zeros(*spec);
    for (k, slice) in slices.iter().enumerate() {
        for j in 0..spec.height {
            for i in 0..spec.width {
                // FFT round-off can leave tiny negatives on a nonnegative input.
                out.set(i, j, k, slice.get(i, j).max(0.0));
            }
        }
    }
    Ok(out)
}

/// Lifts a nonnegative image: W(x, θ_k) = (k_θk ∗ u)(x), normalized to `[0, 1]`.
pub fn lift_image(image: &Raster, spec: &GridSpec, params: &LiftKernelParams) -> Result<Normalized> {
    Ok(normalize_score(&lift_image_raw(image, spec, params)?))
}
