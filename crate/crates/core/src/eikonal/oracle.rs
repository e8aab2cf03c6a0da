//! Exact shortest paths on the lattice graph, used to audit fast marching.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{DistanceMap, SolveStats};
use crate::error::{Error, Result};
use crate::grid::{LiftedField, UNREACHED};
use crate::metric::{metric_eval_with_cost, CostField};
use crate::types::{LiftedLandmark, MetricParams};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Dijkstra on the graph linking grid nodes within `radius` voxels (index
/// space, θ periodic). Edge weights are metric lengths of the straight
/// segment with the metric sampled at its midpoint.
pub fn dijkstra_oracle(cost: &CostField, params: &MetricParams, seed: &LiftedLandmark, radius: f64) -> Result<DistanceMap> {
    params.validate()?;
    if !(radius >= 1.0) {
        return Err(Error::Config(format!("oracle radius must be at least 1, got {radius}")));
    }
    if cost.field().values().iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::Config("cost field must be positive and finite".into()));
    }
    let spec = *cost.spec();
    spec.check_inside(seed.landmark.x, seed.landmark.y)?;
    let r = radius.floor() as i64;
    let mut offsets = Vec::new();
    for di in -r..=r {
        for dj in -r..=r {
            for dk in -r..=r {
                let n2 = (di * di + dj * dj + dk * dk) as f64;
                if n2 > 0.0 && n2 <= radius * radius {
                    offsets.push([di, dj, dk]);
                }
            }
        }
    }

    let (w, h, nt) = (spec.width as i64, spec.height as i64, spec.n_theta as i64);
    let hth = spec.theta_step();
    let field = cost.field();
    let mut dist = vec![UNREACHED; spec.len()];
    let mut done = vec![false; spec.len()];
    let (si, sj, sk) = spec.nearest_node(seed.landmark.x, seed.landmark.y, seed.theta);
    let start = spec.index(si, sj, sk);
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Key(0.0, start)));
    let mut stats = SolveStats::default();

    while let Some(Reverse(Key(d, idx))) = heap.pop() {
        if done[idx] {
            continue;
        }
        done[idx] = true;
        stats.accepted += 1;
        let (i, j, k) = spec.coords(idx);
        for o in &offsets {
            let (x, y) = (i as i64 + o[0], j as i64 + o[1]);
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            let t = (k as i64 + o[2]).rem_euclid(nt);
            let nb = ((x * h + y) * nt + t) as usize;
            if done[nb] {
                continue;
            }
            let mx = (i as f64 + 0.5 * o[0] as f64) * spec.spacing;
            let my = (j as f64 + 0.5 * o[1] as f64) * spec.spacing;
            let mt = (k as f64 + 0.5 * o[2] as f64) * hth;
            let c = field.sample_unchecked(mx, my, mt);
            let v = (o[0] as f64 * spec.spacing, o[1] as f64 * spec.spacing, o[2] as f64 * hth);
            let nd = d + metric_eval_with_cost(c, params, mt, v);
            if nd < dist[nb] {
                dist[nb] = nd;
                heap.push(Reverse(Key(nd, nb)));
            }
        }
    }
    Ok(DistanceMap {
        field: LiftedField::from_values(spec, dist)?,
        seed: *seed,
        stats,
    })
}
