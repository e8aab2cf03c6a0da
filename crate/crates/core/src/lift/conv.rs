//! Convolution helpers shared by the lifting operators.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::raster::Raster;

/// Sampled 1D Gaussian of std `sigma` over `[-radius, radius]`, normalized to unit sum.
pub fn gaussian_1d(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable convolution of a strided 2D slice with zero padding.
///
/// `get(x, y)` / `set(x, y, v)` abstract the storage so the same routine serves
/// rasters and θ-slices of lifted fields.
pub fn separable_zero_pad(
    width: usize,
    height: usize,
    kx: &[f64],
    ky: &[f64],
    get: impl Fn(usize, usize) -> f64,
    mut set: impl FnMut(usize, usize, f64),
) {
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (t, &w) in kx.iter().enumerate() {
                let xx = x as isize + t as isize - rx;
                if xx >= 0 && (xx as usize) < width {
                    acc += w * get(xx as usize, y);
                }
            }
            tmp[y * width + x] = acc;
        }
    }
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (t, &w) in ky.iter().enumerate() {
                let yy = y as isize + t as isize - ry;
                if yy >= 0 && (yy as usize) < height {
                    acc += w * tmp[yy as usize * width + x];
                }
            }
            set(x, y, acc);
        }
    }
}

/// Separable convolution with replicate borders.
pub fn separable_replicate(image: &Raster, kx: &[f64], ky: &[f64]) -> Raster {
    let (w, h) = (image.width, image.height);
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = Raster::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kx
                .iter()
                .enumerate()
                .map(|(t, &c)| c * image.get_clamped(x as isize + t as isize - rx, y as isize))
                .sum();
            tmp.set(x, y, acc);
        }
    }
    let mut out = Raster::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = ky
                .iter()
                .enumerate()
                .map(|(t, &c)| c * tmp.get_clamped(x as isize, y as isize + t as isize - ry))
                .sum();
            out.set(x, y, acc);
        }
    }
    out
}

/// Linear (zero-padded) 2D convolution of one image against many kernels via FFT.
pub struct FftConvolver {
    width: usize,
    height: usize,
    pw: usize,
    ph: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    image_hat: Vec<Complex<f64>>,
}

impl FftConvolver {
    /// Prepares the transform of `image` for kernels of half-width up to `radius`.
    pub fn new(image: &Raster, radius: usize) -> Self {
        let (width, height) = (image.width, image.height);
        let pw = width + radius;
        let ph = height + radius;
        let mut planner = FftPlanner::new();
        let mut conv = FftConvolver {
            width,
            height,
            pw,
            ph,
            row_fwd: planner.plan_fft_forward(pw),
            row_inv: planner.plan_fft_inverse(pw),
            col_fwd: planner.plan_fft_forward(ph),
            col_inv: planner.plan_fft_inverse(ph),
            image_hat: Vec::new(),
        };
        let mut buf = vec![Complex::new(0.0, 0.0); pw * ph];
        for y in 0..height {
            for x in 0..width {
                buf[y * pw + x].re = image.get(x, y);
            }
        }
        conv.forward(&mut buf);
        conv.image_hat = buf;
        conv
    }

    fn forward(&self, buf: &mut [Complex<f64>]) {
        for row in buf.chunks_exact_mut(self.pw) {
            self.row_fwd.process(row);
        }
        self.columns(buf, &self.col_fwd);
    }

    fn inverse(&self, buf: &mut [Complex<f64>]) {
        self.columns(buf, &self.col_inv);
        for row in buf.chunks_exact_mut(self.pw) {
            self.row_inv.process(row);
        }
    }

    fn columns(&self, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let mut col = vec![Complex::new(0.0, 0.0); self.ph];
        for x in 0..self.pw {
            for y in 0..self.ph {
                col[y] = buf[y * self.pw + x];
            }
            fft.process(&mut col);
            for y in 0..self.ph {
                buf[y * self.pw + x] = col[y];
            }
        }
    }

    /// Convolves with a square kernel given as `(2r+1)²` row-major taps, `r ≤ radius`.
    pub fn convolve(&self, kernel: &[f64], r: usize) -> Raster {
        let side = 2 * r + 1;
        debug_assert_eq!(kernel.len(), side * side);
        let mut buf = vec![Complex::new(0.0, 0.0); self.pw * self.ph];
        for dy in 0..side {
            for dx in 0..side {
                let ox = (dx as isize - r as isize).rem_euclid(self.pw as isize) as usize;
                let oy = (dy as isize - r as isize).rem_euclid(self.ph as isize) as usize;
                buf[oy * self.pw + ox].re += kernel[dy * side + dx];
            }
        }
        self.forward(&mut buf);
        for (b, a) in buf.iter_mut().zip(&self.image_hat) {
            *b *= *a;
        }
        self.inverse(&mut buf);
        let norm = (self.pw * self.ph) as f64;
        Raster::from_fn(self.width, self.height, |x, y| buf[y * self.pw + x].re / norm)
    }
}
