//! Relaxed Reeds-Shepp cost and metric.
//!
//! For a point `(x, θ)` and velocity `(ẋ, θ̇)` the metric is
//! `P² = C² (|ẋ·e_θ|² + |ẋ∧e_θ|²/ε² + ξ²|θ̇|²)` with `C = 1/(1 + λW²)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{angular_distance, GridSpec, LiftedField};
use crate::types::{Landmark, LandmarkClass, LandmarkSource, LiftedLandmark, MetricParams};

/// Pointwise cost on the lifted grid, values in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField(LiftedField);

impl CostField {
    /// Wraps an arbitrary positive field (used for synthetic cost fields).
    pub fn new(field: LiftedField) -> Result<Self> {
        if field.values().iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("cost values must be positive and finite".into()));
        }
        Ok(CostField(field))
    }

    pub fn uniform(spec: GridSpec, value: f64) -> Result<Self> {
        Self::new(LiftedField::filled(spec, value))
    }

    pub fn field(&self) -> &LiftedField {
        &self.0
    }

    pub fn spec(&self) -> &GridSpec {
        self.0.spec()
    }

    pub fn into_field(self) -> LiftedField {
        self.0
    }

    /// Multiplies every value by `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.0.map(|v| v * alpha))
    }
}

/// C = 1 / (1 + λ W²).
pub fn cost_from_score(w: &LiftedField, params: &MetricParams) -> CostField {
    CostField(w.map(|v| 1.0 / (1.0 + params.lambda * v * v)))
}

/// Local quadratic form of the metric with C = 1 in `(dx, dy, dθ)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor(pub [[f64; 3]; 3]);

impl Tensor {
    pub fn at_orientation(theta: f64, params: &MetricParams) -> Tensor {
        let (c, s) = (theta.cos(), theta.sin());
        let inv_e2 = 1.0 / (params.epsilon * params.epsilon);
        // e eᵀ + e⊥e⊥ᵀ/ε², with e = (c, s), e⊥ = (-s, c)
        let xx = c * c + s * s * inv_e2;
        let yy = s * s + c * c * inv_e2;
        let xy = c * s * (1.0 - inv_e2);
        Tensor([[xx, xy, 0.0], [xy, yy, 0.0], [0.0, 0.0, params.xi * params.xi]])
    }

    #[inline]
    pub fn quad(&self, v: [f64; 3]) -> f64 {
        self.dot(v, v)
    }

    #[inline]
    pub fn dot(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let m = &self.0;
        let mb = [
            m[0][0] * b[0] + m[0][1] * b[1] + m[0][2] * b[2],
            m[1][0] * b[0] + m[1][1] * b[1] + m[1][2] * b[2],
            m[2][0] * b[0] + m[2][1] * b[1] + m[2][2] * b[2],
        ];
        a[0] * mb[0] + a[1] * mb[1] + a[2] * mb[2]
    }

    /// Applies the inverse form: `M⁻¹ g`.
    pub fn inverse_apply(theta: f64, params: &MetricParams, g: [f64; 3]) -> [f64; 3] {
        let (c, s) = (theta.cos(), theta.sin());
        let e2 = params.epsilon * params.epsilon;
        let along = g[0] * c + g[1] * s;
        let across = -g[0] * s + g[1] * c;
        [
            along * c - e2 * across * s,
            along * s + e2 * across * c,
            g[2] / (params.xi * params.xi),
        ]
    }
}

/// Evaluates the metric `P_ε` at `point = (x, y, θ)` for `velocity = (ẋ, ẏ, θ̇)`.
pub fn metric_eval(cost: &CostField, params: &MetricParams, point: (f64, f64, f64), velocity: (f64, f64, f64)) -> Result<f64> {
    let c = cost.field().sample(point.0, point.1, point.2)?;
    Ok(metric_eval_with_cost(c, params, point.2, velocity))
}

pub(crate) fn metric_eval_with_cost(c: f64, params: &MetricParams, theta: f64, v: (f64, f64, f64)) -> f64 {
    let (ct, st) = (theta.cos(), theta.sin());
    let along = v.0 * ct + v.1 * st;
    let across = v.0 * st - v.1 * ct;
    c * (along * along + across * across / (params.epsilon * params.epsilon) + params.xi * params.xi * v.2 * v.2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InjectParams {
    /// Minimum angular separation between the two orientations of a crossing.
    pub min_sep: f64,
}

impl Default for InjectParams {
    fn default() -> Self {
        InjectParams { min_sep: PI / 8.0 }
    }
}

/// Output of [`inject_landmarks`].
#[derive(Debug, Clone)]
pub struct Injected {
    pub score: LiftedField,
    pub lifted: Vec<LiftedLandmark>,
}

fn argmax(profile: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in profile.iter().enumerate() {
        if v > profile[best] {
            best = k;
        }
    }
    best
}

/// Largest periodic local maximum at least `min_sep` away from bin `first`.
fn secondary_peak(profile: &[f64], first: usize, spec: &GridSpec, min_sep: f64) -> Option<usize> {
    let n = profile.len();
    let mut best: Option<usize> = None;
    for k in 0..n {
        let (prev, next) = (profile[(k + n - 1) % n], profile[(k + 1) % n]);
        let is_peak = profile[k] > prev && profile[k] >= next;
        if !is_peak || angular_distance(spec.theta(k), spec.theta(first)) < min_sep - 1e-12 {
            continue;
        }
        if best.is_none_or(|b| profile[k] > profile[b]) {
            best = Some(k);
        }
    }
    best
}

/// Assigns orientations to landmarks and saturates W at bifurcations.
///
/// Bifurcation columns are set to 1 for every θ; the lifted node takes the
/// argmax of the original profile. Crossings yield two nodes: the global
/// maximum and the strongest local maximum at least `min_sep` away (falling
/// back to a perpendicular, low-confidence node). Endpoints use the argmax.
pub fn inject_landmarks(w: &LiftedField, landmarks: &[Landmark], params: &InjectParams) -> Result<Injected> {
    if !(params.min_sep > 0.0 && params.min_sep <= PI / 2.0 + 1e-12) {
        return Err(Error::Config(format!("min_sep must lie in (0, π/2], got {}", params.min_sep)));
    }
    let spec = *w.spec();
    for l in landmarks {
        l.validate(&spec)?;
    }
    let mut score = w.clone();
    let mut lifted = Vec::with_capacity(landmarks.len());
    for l in landmarks {
        let (i, j, _) = spec.nearest_node(l.x, l.y, 0.0);
        let profile = w.column(i, j);
        let first = argmax(profile);
        let theta = spec.theta(first);
        match l.class {
            LandmarkClass::Bifurcation => {
                score.column_mut(i, j).iter_mut().for_each(|v| *v = 1.0);
                lifted.push(LiftedLandmark::new(*l, theta, LandmarkSource::Argmax));
            }
            LandmarkClass::Crossing => {
                lifted.push(LiftedLandmark::new(*l, theta, LandmarkSource::Argmax));
                let mut second = match secondary_peak(profile, first, &spec, params.min_sep) {
                    Some(k) => LiftedLandmark::new(*l, spec.theta(k), LandmarkSource::CrossingSecondary),
                    None => {
                        let mut fallback = LiftedLandmark::new(*l, theta + PI / 2.0, LandmarkSource::CrossingSecondary);
                        fallback.low_confidence = true;
                        fallback
                    }
                };
                second.theta = crate::grid::wrap_angle(second.theta);
                lifted.push(second);
            }
            LandmarkClass::Endpoint => {
                lifted.push(LiftedLandmark::new(*l, theta, LandmarkSource::Argmax));
            }
        }
    }
    Ok(Injected { score, lifted })
}
