//! The geodesic graph over lifted landmarks: pairwise distances, clustering
//! and per-cluster spanning trees realized as minimal paths.

mod cluster;
mod dsu;
mod mst;
mod tree;

pub use cluster::{cluster_landmarks, single_linkage, Clustering, Merge};
pub use dsu::UnionFind;
pub use mst::{minimal_spanning_tree, TreeEdge};
pub use tree::{build_vessel_trees, DegradedEdge, TreeReport, VesselEdge, VesselTree};

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::eikonal::{DistanceMap, FastMarching};
use crate::error::{Error, Result};
use crate::metric::CostField;
use crate::types::{LiftedLandmark, MetricParams};

/// Pairwise geodesic distances. `d` is symmetrized, `raw` keeps the row reads.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub nodes: Vec<LiftedLandmark>,
    n: usize,
    d: Vec<f64>,
    raw: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from explicit rows (nodes default to the origin).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config("distance matrix must be square".into()));
        }
        let raw: Vec<f64> = rows.into_iter().flatten().collect();
        if raw.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Config("distances must be nonnegative".into()));
        }
        Ok(Self::symmetrize(vec![LiftedLandmark::at(0.0, 0.0, 0.0); n], raw))
    }

    fn symmetrize(nodes: Vec<LiftedLandmark>, raw: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
                }
            }
        }
        DistanceMatrix { nodes, n, d, raw }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Distance read from row `i` (solve seeded at node `i`) before symmetrization.
    #[inline]
    pub fn raw(&self, i: usize, j: usize) -> f64 {
        self.raw[i * self.n + j]
    }

    /// Largest `|d_ij - d_ji| / max(d_ij, d_ji)` over finite off-diagonal pairs.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let (a, b) = (self.raw(i, j), self.raw(j, i));
                if a.is_finite() && b.is_finite() && a.max(b) > 0.0 {
                    worst = worst.max((a - b).abs() / a.max(b));
                }
            }
        }
        worst
    }

    /// CSV with node indices as row and column headers; unreachable pairs are `inf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node");
        for j in 0..self.n {
            let _ = write!(s, ",{j}");
        }
        s.push('\n');
        for i in 0..self.n {
            let _ = write!(s, "{i}");
            for j in 0..self.n {
                let v = self.get(i, j);
                if v.is_finite() {
                    let _ = write!(s, ",{v}");
                } else {
                    s.push_str(",inf");
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Distance maps kept from [`pairwise_distances_with_maps`], indexed by seed node.
#[derive(Debug, Default)]
pub struct MapCache {
    maps: Vec<Option<DistanceMap>>,
}

impl MapCache {
    pub fn get(&self, i: usize) -> Option<&DistanceMap> {
        self.maps.get(i).and_then(|m| m.as_ref())
    }

    pub fn len(&self) -> usize {
        self.maps.iter().filter(|m| m.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pairwise distances by one early-aborted fast-marching run per node.
pub fn pairwise_distances(cost: &CostField, params: &MetricParams, nodes: &[LiftedLandmark]) -> Result<DistanceMatrix> {
    Ok(pairwise_distances_with_maps(cost, params, nodes, 0)?.0)
}

/// As [`pairwise_distances`], also keeping the first `keep_maps` distance maps
/// for later backtracking.
pub fn pairwise_distances_with_maps(
    cost: &CostField,
    params: &MetricParams,
    nodes: &[LiftedLandmark],
    keep_maps: usize,
) -> Result<(DistanceMatrix, MapCache)> {
    let spec = cost.spec();
    for node in nodes {
        spec.check_inside(node.landmark.x, node.landmark.y)?;
    }
    let n = nodes.len();
    if n == 0 {
        return Ok((DistanceMatrix::symmetrize(Vec::new(), Vec::new()), MapCache::default()));
    }
    let fm = FastMarching::new(cost, params)?;
    let rows: Vec<Result<(Vec<f64>, Option<DistanceMap>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<LiftedLandmark> = (0..n).filter(|&j| j != i).map(|j| nodes[j]).collect();
            let map = fm.solve_until(&nodes[i], &others)?;
            let row = (0..n)
                .map(|j| if i == j { 0.0 } else { map.at(&nodes[j]).unwrap_or(f64::INFINITY) })
                .collect();
            Ok((row, (i < keep_maps).then_some(map)))
        })
        .collect();
    let mut raw = Vec::with_capacity(n * n);
    let mut maps = Vec::with_capacity(n);
    for r in rows {
        let (row, map) = r?;
        raw.extend(row);
        maps.push(map);
    }
    Ok((DistanceMatrix::symmetrize(nodes.to_vec(), raw), MapCache { maps }))
}
