//! Lifted grid geometry on R² × P¹ and projective angular arithmetic.
//!
//! Node `(i, j, k)` sits at position `(i·spacing, j·spacing)` with orientation
//! `θ_k = kπ/N_θ`. Values are stored x-major: `index = (i·N_y + j)·N_θ + k`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker for nodes a distance computation never reached.
pub const UNREACHED: f64 = f64::MAX;

/// Reduces an angle to `[0, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Distance between two orientations in P¹, in `[0, π/2]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(PI - d)
}

/// Signed shortest rotation taking `b` to `a` modulo π, in `[-π/2, π/2]`.
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI / 2.0 {
        d - PI
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub n_theta: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_spacing() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new(width: usize, height: usize, n_theta: usize) -> Result<Self> {
        Self::with_spacing(width, height, n_theta, 1.0)
    }

    pub fn with_spacing(width: usize, height: usize, n_theta: usize, spacing: f64) -> Result<Self> {
        let spec = GridSpec {
            width,
            height,
            n_theta,
            spacing,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::Config(format!(
                "grid must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if self.n_theta < 4 {
            return Err(Error::Config(format!(
                "need at least 4 orientation bins, got {}",
                self.n_theta
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Config(format!("spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angular step π/N_θ.
    pub fn theta_step(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.theta_step()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.height + j) * self.n_theta + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.n_theta;
        let rest = idx / self.n_theta;
        (rest / self.height, rest % self.height, k)
    }

    /// Largest representable coordinate along x and y.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.width - 1) as f64 * self.spacing,
            (self.height - 1) as f64 * self.spacing,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (ex, ey) = self.extent();
        x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0 && x <= ex && y <= ey
    }

    pub fn check_inside(&self, x: f64, y: f64) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            let (ex, ey) = self.extent();
            Err(Error::Domain(format!(
                "position ({x}, {y}) outside [0, {ex}] x [0, {ey}]"
            )))
        }
    }

    /// Nearest node to a continuous point. Position must be inside the domain.
    pub fn nearest_node(&self, x: f64, y: f64, theta: f64) -> (usize, usize, usize) {
        let i = (x / self.spacing).round().clamp(0.0, (self.width - 1) as f64) as usize;
        let j = (y / self.spacing).round().clamp(0.0, (self.height - 1) as f64) as usize;
        let k = (wrap_angle(theta) / self.theta_step()).round() as usize % self.n_theta;
        (i, j, k)
    }

    /// Orientation bin nearest to `theta`.
    pub fn nearest_bin(&self, theta: f64) -> usize {
        (wrap_angle(theta) / self.theta_step()).round() as usize % self.n_theta
    }
}

/// Scalar field on the lifted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl LiftedField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self::filled(spec, 0.0)
    }

    pub fn filled(spec: GridSpec, value: f64) -> Self {
        LiftedField {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Config(format!(
                "expected {} values for a {}x{}x{} grid, got {}",
                spec.len(),
                spec.width,
                spec.height,
                spec.n_theta,
                values.len()
            )));
        }
        Ok(LiftedField { spec, values })
    }

    /// Builds a field by evaluating `f(i, j, k)` at every node.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for i in 0..spec.width {
            for j in 0..spec.height {
                for k in 0..spec.n_theta {
                    values.push(f(i, j, k));
                }
            }
        }
        LiftedField { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.spec.index(i, j, k);
        self.values[idx] = v;
    }

    /// The θ-profile at a spatial node.
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let start = self.spec.index(i, j, 0);
        &self.values[start..start + self.spec.n_theta]
    }

    pub fn column_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = self.spec.index(i, j, 0);
        let n = self.spec.n_theta;
        &mut self.values[start..start + n]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LiftedField {
        LiftedField {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Trilinear interpolation, clamped spatially, periodic in θ with period π.
    pub fn sample(&self, x: f64, y: f64, theta: f64) -> Result<f64> {
        self.spec.check_inside(x, y)?;
        Ok(self.sample_unchecked(x, y, theta))
    }

    pub(crate) fn sample_unchecked(&self, x: f64, y: f64, theta: f64) -> f64 {
        let s = &self.spec;
        let (i0, i1, fx) = axis_cell(x / s.spacing, s.width);
        let (j0, j1, fy) = axis_cell(y / s.spacing, s.height);
        let t = wrap_angle(theta) / s.theta_step();
        let k0f = t.floor();
        let ft = t - k0f;
        let k0 = (k0f as usize) % s.n_theta;
        let k1 = (k0 + 1) % s.n_theta;

        let lerp = |a: f64, b: f64, w: f64| if w == 0.0 { a } else { a + (b - a) * w };
        let plane = |k: usize| {
            let a = lerp(self.get(i0, j0, k), self.get(i1, j0, k), fx);
            let b = lerp(self.get(i0, j1, k), self.get(i1, j1, k), fx);
            lerp(a, b, fy)
        };
        lerp(plane(k0), plane(k1), ft)
    }
}

/// Lower node, upper node and fractional weight along one clamped axis.
fn axis_cell(u: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let u = u.clamp(0.0, max);
    let f = u.floor();
    let lo = f as usize;
    if lo >= n - 1 {
        (n - 1, n - 1, 0.0)
    } else {
        (lo, lo + 1, u - f)
    }
}
