//! Heap-ordered semi-Lagrangian fast marching on the lifted grid.
//!
//! Each tentative value is the minimum, over stencil vertices, edges and
//! triangles whose vertices are all accepted, of the metric length of the
//! segment to the simplex plus the linearly interpolated distance there.
//! Simplex solutions that would undercut one of their own supports are
//! rejected, so every accepted value dominates the values it was built from.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::stencil::{radius_for, Stencil, StencilTables};
use super::DistanceMap;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, LiftedField, UNREACHED};
use crate::metric::CostField;
use crate::types::{LiftedLandmark, MetricParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Far,
    Trial,
    Accepted,
}

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    value: f64,
    idx: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // Reversed: BinaryHeap is a max-heap. Ties resolve on the node index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Counters collected during one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SolveStats {
    pub accepted: usize,
    /// Accepted values that fell below one of their supporting values. Always 0.
    pub causality_violations: usize,
    pub early_abort: bool,
}

/// Reusable solver for one cost field and metric.
pub struct FastMarching<'a> {
    cost: &'a CostField,
    params: MetricParams,
    tables: StencilTables,
}

impl<'a> FastMarching<'a> {
    pub fn new(cost: &'a CostField, params: &MetricParams) -> Result<Self> {
        Self::with_radius(cost, params, radius_for(params.epsilon))
    }

    /// Uses a fixed spatial stencil radius instead of the ε-based rule.
    pub fn with_radius(cost: &'a CostField, params: &MetricParams, radius: usize) -> Result<Self> {
        params.validate()?;
        if radius == 0 {
            return Err(Error::Config("stencil radius must be at least 1".into()));
        }
        if cost.field().values().iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::Config("cost field must be positive and finite".into()));
        }
        let tables = StencilTables::new(Stencil::new(radius), cost.spec(), params);
        Ok(FastMarching {
            cost,
            params: *params,
            tables,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        self.cost.spec()
    }

    pub fn params(&self) -> &MetricParams {
        &self.params
    }

    pub fn cost(&self) -> &CostField {
        self.cost
    }

    /// Full solve from `seed`.
    pub fn solve(&self, seed: &LiftedLandmark) -> Result<DistanceMap> {
        self.solve_until(seed, &[])
    }

    /// Solve that stops once every target is accepted. Accepted values are
    /// identical to a full run; everything else is left unreached.
    pub fn solve_until(&self, seed: &LiftedLandmark, targets: &[LiftedLandmark]) -> Result<DistanceMap> {
        let spec = *self.spec();
        spec.check_inside(seed.landmark.x, seed.landmark.y)?;
        let mut target_nodes = Vec::with_capacity(targets.len());
        for t in targets {
            spec.check_inside(t.landmark.x, t.landmark.y)?;
            let (i, j, k) = spec.nearest_node(t.landmark.x, t.landmark.y, t.theta);
            target_nodes.push(spec.index(i, j, k));
        }
        let (si, sj, sk) = spec.nearest_node(seed.landmark.x, seed.landmark.y, seed.theta);
        let (values, stats) = self.run(spec.index(si, sj, sk), &target_nodes);
        Ok(DistanceMap {
            field: LiftedField::from_values(spec, values)?,
            seed: *seed,
            stats,
        })
    }

    fn run(&self, seed: usize, targets: &[usize]) -> (Vec<f64>, SolveStats) {
        let spec = *self.spec();
        let n = spec.len();
        let cost = self.cost.field().values();
        let st = &self.tables.stencil;
        let (w, h, nt) = (spec.width as i64, spec.height as i64, spec.n_theta as i64);

        let mut u = vec![UNREACHED; n];
        let mut support = vec![0.0f64; n];
        let mut state = vec![State::Far; n];
        let mut heap = BinaryHeap::new();
        let mut stats = SolveStats::default();

        let mut is_target = vec![false; if targets.is_empty() { 0 } else { n }];
        let mut remaining = 0usize;
        for &t in targets {
            if !is_target[t] {
                is_target[t] = true;
                remaining += 1;
            }
        }

        u[seed] = 0.0;
        state[seed] = State::Trial;
        heap.push(HeapItem { value: 0.0, idx: seed });

        // Neighbour of (i, j, k) at offset o, or None off the spatial grid.
        let shift = |i: i64, j: i64, k: i64, o: [i32; 3]| -> Option<usize> {
            let (x, y) = (i + o[0] as i64, j + o[1] as i64);
            if x < 0 || y < 0 || x >= w || y >= h {
                return None;
            }
            let t = (k + o[2] as i64).rem_euclid(nt);
            Some(((x * h + y) * nt + t) as usize)
        };

        while let Some(HeapItem { value, idx }) = heap.pop() {
            if state[idx] == State::Accepted || value != u[idx] {
                continue;
            }
            state[idx] = State::Accepted;
            stats.accepted += 1;
            if value < support[idx] {
                stats.causality_violations += 1;
            }
            if remaining > 0 && is_target[idx] {
                remaining -= 1;
                if remaining == 0 {
                    stats.early_abort = true;
                    break;
                }
            }

            let (ai, aj, ak) = spec.coords(idx);
            let (ai, aj, ak) = (ai as i64, aj as i64, ak as i64);
            for (o_idx, &o) in st.offsets.iter().enumerate() {
                let Some(x) = shift(ai, aj, ak, o) else { continue };
                if state[x] == State::Accepted {
                    continue;
                }
                let (xi, xj, xk) = spec.coords(x);
                let (xi, xj, xk_i) = (xi as i64, xj as i64, xk as i64);
                // The accepted node as seen from x.
                let va = st.neg[o_idx];
                let node_of = |v: usize| shift(xi, xj, xk_i, st.offsets[v]);
                let accepted = |v: usize| node_of(v).filter(|&m| state[m] == State::Accepted);
                let cx = cost[x];

                let mut best = u[x];
                let mut best_support = support[x];

                let c = 0.5 * (cx + cost[idx]);
                let cand = value + c * self.tables.vertex(xk, va).len;
                if cand < best {
                    best = cand;
                    best_support = value;
                }

                for &e in &st.edges_of[va] {
                    let [e0, e1] = st.edges[e];
                    let (Some(n0), Some(n1)) = (accepted(e0), accepted(e1)) else { continue };
                    let (u0, u1) = (u[n0], u[n1]);
                    let c = 0.5 * cx + 0.25 * (cost[n0] + cost[n1]);
                    let d = self.tables.edge(xk, e);
                    let g = (u1 - u0) / c;
                    let s = g * g * d.inv_q;
                    if s >= 1.0 {
                        continue;
                    }
                    let nrm = d.p / (1.0 - s).sqrt();
                    let t = (d.r - nrm * g) * d.inv_q;
                    if !(t > 0.0 && t < 1.0) {
                        continue;
                    }
                    let cand = c * nrm + u0 + t * (u1 - u0);
                    let sup = u0.max(u1);
                    if cand < sup {
                        continue;
                    }
                    if cand < best {
                        best = cand;
                        best_support = sup;
                    }
                }

                for &tri in &st.tris_of[va] {
                    let [t0, t1, t2] = st.tris[tri];
                    let (Some(n0), Some(n1), Some(n2)) = (accepted(t0), accepted(t1), accepted(t2)) else {
                        continue;
                    };
                    let (u0, u1, u2) = (u[n0], u[n1], u[n2]);
                    let c = 0.5 * cx + (cost[n0] + cost[n1] + cost[n2]) / 6.0;
                    let d = self.tables.tri(xk, tri);
                    let g = [(u1 - u0) / c, (u2 - u0) / c];
                    let qi = d.qinv;
                    let s = qi[0] * g[0] * g[0] + 2.0 * qi[1] * g[0] * g[1] + qi[2] * g[1] * g[1];
                    if s >= 1.0 {
                        continue;
                    }
                    let nrm = d.p / (1.0 - s).sqrt();
                    let rr = [d.r[0] - nrm * g[0], d.r[1] - nrm * g[1]];
                    let w1 = qi[0] * rr[0] + qi[1] * rr[1];
                    let w2 = qi[1] * rr[0] + qi[2] * rr[1];
                    if !(w1 > 0.0 && w2 > 0.0 && w1 + w2 < 1.0) {
                        continue;
                    }
                    let cand = c * nrm + u0 + w1 * (u1 - u0) + w2 * (u2 - u0);
                    let sup = u0.max(u1).max(u2);
                    if cand < sup {
                        continue;
                    }
                    if cand < best {
                        best = cand;
                        best_support = sup;
                    }
                }

                if best < u[x] {
                    u[x] = best;
                    support[x] = best_support;
                    state[x] = State::Trial;
                    heap.push(HeapItem { value: best, idx: x });
                }
            }
        }

        for (v, s) in u.iter_mut().zip(&state) {
            if *s != State::Accepted {
                *v = UNREACHED;
            }
        }
        (u, stats)
    }
}

/// Geodesic distance map from `seed` under the relaxed Reeds-Shepp metric.
pub fn solve_distance(cost: &CostField, params: &MetricParams, seed: &LiftedLandmark) -> Result<DistanceMap> {
    FastMarching::new(cost, params)?.solve(seed)
}
