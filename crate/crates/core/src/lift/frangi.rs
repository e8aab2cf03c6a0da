//! Multiscale Hessian vesselness (Frangi) for bright tubular structures.

use serde::{Deserialize, Serialize};

use super::conv::separable_replicate;
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrangiParams {
    /// Hessian smoothing stds in pixels.
    pub scales: Vec<f64>,
    /// Blobness weight.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Structureness weight; `None` uses half the maximum Hessian norm.
    #[serde(default)]
    pub c: Option<f64>,
    /// Invert the image first so dark vessels become bright.
    #[serde(default)]
    pub dark_vessels: bool,
}

fn default_beta() -> f64 {
    0.5
}

impl Default for FrangiParams {
    fn default() -> Self {
        FrangiParams {
            scales: vec![1.0, 2.0, 3.0],
            beta: 0.5,
            c: None,
            dark_vessels: false,
        }
    }
}

impl FrangiParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::Config("frangi needs at least one scale".into()));
        }
        if self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("frangi scales must be positive".into()));
        }
        if !(self.beta > 0.0) || self.c.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("frangi beta and c must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian and its first two derivatives sampled on `[-r, r]`.
fn derivative_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = (4.0 * sigma).ceil().max(1.0) as isize;
    let s2 = sigma * sigma;
    let g: Vec<f64> = (-r..=r).map(|t| (-(t * t) as f64 / (2.0 * s2)).exp()).collect();
    let norm: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / norm).collect();
    let d1: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(t, &v)| -(t as f64) / s2 * v)
        .collect();
    let d2: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(t, &v)| ((t * t) as f64 / (s2 * s2) - 1.0 / s2) * v)
        .collect();
    // Sampling leaves a small DC term; remove it so flat regions give exactly 0.
    let mean = d2.iter().sum::<f64>() / d2.len() as f64;
    let d2 = d2.iter().map(|v| v - mean).collect();
    (g, d1, d2)
}

/// Eigenvalues of `[[a, b], [b, c]]` ordered so that `|l1| <= |l2|`.
pub(crate) fn sym_eigen_2x2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (p, q) = (mean + rad, mean - rad);
    if p.abs() <= q.abs() {
        (p, q)
    } else {
        (q, p)
    }
}

struct ScaleResponse {
    l1: Vec<f64>,
    l2: Vec<f64>,
}

fn hessian_eigen(image: &Raster, sigma: f64) -> ScaleResponse {
    let (g, d1, d2) = derivative_kernels(sigma);
    // Correlation with the sampled derivative equals convolution with its mirror.
    let flip = |k: &[f64]| k.iter().rev().copied().collect::<Vec<_>>();
    let (d1, d2) = (flip(&d1), flip(&d2));
    let norm = sigma * sigma;
    let hxx = separable_replicate(image, &d2, &g);
    let hyy = separable_replicate(image, &g, &d2);
    let hxy = separable_replicate(image, &d1, &d1);
    let n = image.data.len();
    let mut l1 = Vec::with_capacity(n);
    let mut l2 = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = sym_eigen_2x2(hxx.data[i] * norm, hxy.data[i] * norm, hyy.data[i] * norm);
        l1.push(a);
        l2.push(b);
    }
    ScaleResponse { l1, l2 }
}

/// Frangi vesselness in `[0, 1]`, maximized over scales.
pub fn frangi_vesselness(image: &Raster, params: &FrangiParams) -> Result<Raster> {
    params.validate()?;
    let input;
    let image = if params.dark_vessels {
        let (_, hi) = image.min_max();
        input = image.map(|v| hi - v);
        &input
    } else {
        image
    };
    let responses: Vec<ScaleResponse> = params.scales.iter().map(|&s| hessian_eigen(image, s)).collect();
    let c = params.c.unwrap_or_else(|| {
        let max_norm = responses
            .iter()
            .flat_map(|r| r.l1.iter().zip(&r.l2).map(|(a, b)| (a * a + b * b).sqrt()))
            .fold(0.0f64, f64::max);
        0.5 * max_norm
    });
    let mut out = Raster::zeros(image.width, image.height);
    if !(c > 1e-9) {
        return Ok(out);
    }
    let b2 = 2.0 * params.beta * params.beta;
    let c2 = 2.0 * c * c;
    for r in &responses {
        for (i, (&l1, &l2)) in r.l1.iter().zip(&r.l2).enumerate() {
            if l2 >= 0.0 {
                continue;
            }
            let rb = l1 / l2;
            let s2 = l1 * l1 + l2 * l2;
            let v = (-rb * rb / b2).exp() * (1.0 - (-s2 / c2).exp());
            if v > out.data[i] {
                out.data[i] = v.clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}
