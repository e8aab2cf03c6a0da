use serde::{Deserialize, Serialize};

use super::{minimal_spanning_tree, Clustering, DistanceMatrix, MapCache};
use crate::eikonal::{backtrack_geodesic, BacktrackParams, FastMarching, GeodesicPath};
use crate::error::Result;
use crate::metric::CostField;
use crate::types::MetricParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    /// `(x, y, θ)` samples from node `j` to node `i`.
    pub polyline: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselTree {
    pub id: usize,
    pub nodes: Vec<usize>,
    pub edges: Vec<VesselEdge>,
}

/// An edge whose geodesic could not be backtracked; a straight segment stands in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradedEdge {
    pub i: usize,
    pub j: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub clusters: Vec<VesselTree>,
    #[serde(skip)]
    pub degraded: Vec<DegradedEdge>,
}

/// Per cluster: Kruskal tree on the geodesic graph, each edge realized as the
/// minimal path backtracked in the distance map of its smaller-index endpoint.
pub fn build_vessel_trees(
    cost: &CostField,
    params: &MetricParams,
    matrix: &DistanceMatrix,
    clustering: &Clustering,
    cache: &MapCache,
    opts: &BacktrackParams,
) -> Result<TreeReport> {
    let mut report = TreeReport {
        clusters: Vec::new(),
        degraded: Vec::new(),
    };
    if matrix.is_empty() {
        return Ok(report);
    }
    let fm = FastMarching::new(cost, params)?;
    for id in 0..clustering.n_clusters() {
        let members = clustering.members(id);
        let mst = minimal_spanning_tree(matrix, &members)?;
        let mut edges = Vec::with_capacity(mst.len());
        for e in mst {
            let (seed, target) = (matrix.nodes[e.i], matrix.nodes[e.j]);
            let recomputed;
            let map = match cache.get(e.i) {
                Some(m) => m,
                None => {
                    recomputed = fm.solve_until(&seed, &[target])?;
                    &recomputed
                }
            };
            let (polyline, degraded) = match backtrack_geodesic(map, cost, params, &target, opts) {
                Ok(GeodesicPath { points, .. }) => (points, false),
                Err(err) => {
                    log::warn!("edge {}-{} degraded: {err}", e.i, e.j);
                    report.degraded.push(DegradedEdge {
                        i: e.i,
                        j: e.j,
                        error: err.to_string(),
                    });
                    let a = target.position();
                    let b = seed.position();
                    (vec![[a.0, a.1, a.2], [b.0, b.1, b.2]], true)
                }
            };
            edges.push(VesselEdge {
                i: e.i,
                j: e.j,
                weight: e.weight,
                polyline,
                degraded,
            });
        }
        report.clusters.push(VesselTree { id, nodes: members, edges });
    }
    Ok(report)
}
