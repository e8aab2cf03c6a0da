use serde::{Deserialize, Serialize};

use super::{DistanceMap, GeodesicPath};
use crate::error::{Error, Result};
use crate::grid::{angular_difference, wrap_angle, GridSpec, UNREACHED};
use crate::metric::{metric_eval_with_cost, CostField, Tensor};
use crate::types::{LiftedLandmark, MetricParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktrackParams {
    /// Integration step in voxels.
    pub step: f64,
    /// Distance to the seed (voxels) at which integration stops.
    pub stop_radius: f64,
}

impl Default for BacktrackParams {
    fn default() -> Self {
        BacktrackParams {
            step: 0.25,
            stop_radius: 1.0,
        }
    }
}

/// Continuous position in voxel units; θ is left unwrapped along the path.
type Voxel = [f64; 3];

struct Descent<'a> {
    spec: GridSpec,
    u: &'a [f64],
}

impl Descent<'_> {
    fn node(&self, i: i64, j: i64, k: i64) -> Option<f64> {
        let s = &self.spec;
        if i < 0 || j < 0 || i >= s.width as i64 || j >= s.height as i64 {
            return None;
        }
        let k = k.rem_euclid(s.n_theta as i64) as usize;
        let v = self.u[s.index(i as usize, j as usize, k)];
        (v < UNREACHED).then_some(v)
    }

    /// Corners and trilinear weights of the cell containing `p`.
    fn cell(&self, p: Voxel) -> ([i64; 3], [f64; 3]) {
        let s = &self.spec;
        let clampf = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64);
        let (x, y) = (clampf(p[0], s.width), clampf(p[1], s.height));
        let mut base = [x.floor() as i64, y.floor() as i64, p[2].floor() as i64];
        let mut frac = [x - base[0] as f64, y - base[1] as f64, p[2] - base[2] as f64];
        for (a, n) in [(0, s.width), (1, s.height)] {
            if base[a] >= n as i64 - 1 {
                base[a] = n as i64 - 1;
                frac[a] = 0.0;
            }
        }
        (base, frac)
    }

    fn interpolate(&self, p: Voxel, f: impl Fn(i64, i64, i64) -> Option<[f64; 4]>) -> Option<[f64; 4]> {
        let (b, t) = self.cell(p);
        let mut acc = [0.0; 4];
        for c in 0..8 {
            let (dx, dy, dk) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = (if dx == 1 { t[0] } else { 1.0 - t[0] })
                * (if dy == 1 { t[1] } else { 1.0 - t[1] })
                * (if dk == 1 { t[2] } else { 1.0 - t[2] });
            if w == 0.0 {
                continue;
            }
            let v = f(b[0] + dx, b[1] + dy, b[2] + dk)?;
            for a in 0..4 {
                acc[a] += w * v[a];
            }
        }
        Some(acc)
    }

    fn value(&self, p: Voxel) -> Option<f64> {
        self.interpolate(p, |i, j, k| self.node(i, j, k).map(|v| [v, 0.0, 0.0, 0.0]))
            .map(|v| v[0])
    }

    /// Central-difference gradient at a node, in voxel units.
    fn node_gradient(&self, i: i64, j: i64, k: i64) -> Option<[f64; 4]> {
        let c = self.node(i, j, k)?;
        let diff = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(a), Some(b)) => Some(0.5 * (b - a)),
            (Some(a), None) => Some(c - a),
            (None, Some(b)) => Some(b - c),
            (None, None) => None,
        };
        Some([
            diff(self.node(i - 1, j, k), self.node(i + 1, j, k))?,
            diff(self.node(i, j - 1, k), self.node(i, j + 1, k))?,
            diff(self.node(i, j, k - 1), self.node(i, j, k + 1))?,
            0.0,
        ])
    }

    fn gradient(&self, p: Voxel) -> Option<[f64; 3]> {
        self.interpolate(p, |i, j, k| self.node_gradient(i, j, k))
            .map(|g| [g[0], g[1], g[2]])
    }

    fn nearest(&self, p: Voxel) -> [i64; 3] {
        let s = &self.spec;
        [
            p[0].round().clamp(0.0, (s.width - 1) as f64) as i64,
            p[1].round().clamp(0.0, (s.height - 1) as f64) as i64,
            p[2].round() as i64,
        ]
    }

    /// Lowest node below `level` around the node nearest `p`.
    fn discrete_step(&self, p: Voxel, level: f64) -> Option<Voxel> {
        let n = self.nearest(p);
        for radius in [1i64, 2, 3] {
            let mut best: Option<(f64, [i64; 3])> = None;
            for di in -radius..=radius {
                for dj in -radius..=radius {
                    for dk in -1..=1 {
                        let m = [n[0] + di, n[1] + dj, n[2] + dk];
                        let Some(v) = self.node(m[0], m[1], m[2]) else { continue };
                        if v < level && best.is_none_or(|(b, _)| v < b) {
                            best = Some((v, m));
                        }
                    }
                }
            }
            if let Some((_, m)) = best {
                return Some([m[0] as f64, m[1] as f64, m[2] as f64]);
            }
        }
        None
    }
}

fn to_voxel(spec: &GridSpec, x: f64, y: f64, theta: f64) -> Voxel {
    [x / spec.spacing, y / spec.spacing, wrap_angle(theta) / spec.theta_step()]
}

fn to_world(spec: &GridSpec, p: Voxel) -> [f64; 3] {
    [p[0] * spec.spacing, p[1] * spec.spacing, wrap_angle(p[2] * spec.theta_step())]
}

/// Voxel distance with θ taken modulo N_θ.
fn voxel_distance(spec: &GridSpec, a: Voxel, b: Voxel) -> f64 {
    let n = spec.n_theta as f64;
    let mut dk = (a[2] - b[2]).rem_euclid(n);
    if dk > n / 2.0 {
        dk = n - dk;
    }
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + dk * dk).sqrt()
}

/// Metric length of a polyline of `(x, y, θ)` samples by midpoint quadrature.
pub fn path_metric_length(cost: &CostField, params: &MetricParams, points: &[[f64; 3]]) -> f64 {
    points
        .windows(2)
        .map(|seg| {
            let (a, b) = (seg[0], seg[1]);
            let dth = angular_difference(b[2], a[2]);
            let mid = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), a[2] + 0.5 * dth);
            let c = cost.field().sample_unchecked(mid.0, mid.1, mid.2);
            metric_eval_with_cost(c, params, mid.2, (b[0] - a[0], b[1] - a[1], dth))
        })
        .sum()
}

/// Descends the distance map from `target` to its seed.
///
/// Follows `γ' ∝ -M⁻¹∇U` with a fixed voxel step, dropping to discrete
/// steepest descent over neighbouring nodes whenever a step fails to lower U.
pub fn backtrack_geodesic(
    dist: &DistanceMap,
    cost: &CostField,
    params: &MetricParams,
    target: &LiftedLandmark,
    opts: &BacktrackParams,
) -> Result<GeodesicPath> {
    if !(opts.step > 0.0 && opts.stop_radius > 0.0) {
        return Err(Error::Config("backtrack step and stop radius must be positive".into()));
    }
    let spec = *dist.field.spec();
    spec.check_inside(target.landmark.x, target.landmark.y)?;
    let d = Descent { spec, u: dist.field.values() };
    let seed = dist.seed;
    let (si, sj, sk) = spec.nearest_node(seed.landmark.x, seed.landmark.y, seed.theta);
    let seed_vox = [si as f64, sj as f64, sk as f64];

    let start = to_voxel(&spec, target.landmark.x, target.landmark.y, target.theta);
    let (ti, tj, tk) = spec.nearest_node(target.landmark.x, target.landmark.y, target.theta);
    if dist.field.get(ti, tj, tk) >= UNREACHED {
        return Err(Error::Domain("backtrack target was not reached by the distance map".into()));
    }
    if target.position() == seed.position() {
        return Ok(GeodesicPath {
            points: vec![[target.landmark.x, target.landmark.y, target.theta]],
            length: 0.0,
        });
    }

    let mut p = start;
    let mut pts = vec![to_world(&spec, p)];
    let max_steps = (50.0 * (spec.width + spec.height + spec.n_theta) as f64 / opts.step) as usize;
    let hth = spec.theta_step();
    let mut steps = 0usize;
    while voxel_distance(&spec, p, seed_vox) > opts.stop_radius {
        steps += 1;
        let here = d.value(p);
        let stall = || {
            let w = to_world(&spec, p);
            Error::BacktrackStall {
                x: w[0],
                y: w[1],
                theta: w[2],
                value: here.unwrap_or(f64::NAN),
            }
        };
        if steps > max_steps {
            return Err(stall());
        }
        let mut next = None;
        if let (Some(u0), Some(g)) = (here, d.gradient(p)) {
            let gp = [g[0] / spec.spacing, g[1] / spec.spacing, g[2] / hth];
            let theta = p[2] * hth;
            let dir = Tensor::inverse_apply(theta, params, gp);
            let dv = [-dir[0] / spec.spacing, -dir[1] / spec.spacing, -dir[2] / hth];
            let norm = (dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2]).sqrt();
            if norm > 0.0 && norm.is_finite() {
                let mut q = [
                    p[0] + opts.step * dv[0] / norm,
                    p[1] + opts.step * dv[1] / norm,
                    p[2] + opts.step * dv[2] / norm,
                ];
                q[0] = q[0].clamp(0.0, (spec.width - 1) as f64);
                q[1] = q[1].clamp(0.0, (spec.height - 1) as f64);
                if d.value(q).is_some_and(|u1| u1 < u0) {
                    next = Some(q);
                }
            }
        }
        let q = match next {
            Some(q) => q,
            None => {
                let level = here.unwrap_or_else(|| {
                    let n = d.nearest(p);
                    d.node(n[0], n[1], n[2]).unwrap_or(UNREACHED)
                });
                match d.discrete_step(p, level) {
                    Some(q) => q,
                    None => return Err(stall()),
                }
            }
        };
        p = q;
        pts.push(to_world(&spec, p));
    }
    pts.push(to_world(&spec, seed_vox));
    let length = path_metric_length(cost, params, &pts);
    Ok(GeodesicPath { points: pts, length })
}
