//! Geodesic distance maps, minimal-path extraction and a graph oracle.

mod backtrack;
mod fast_marching;
mod oracle;
pub(crate) mod stencil;

pub use backtrack::{backtrack_geodesic, path_metric_length, BacktrackParams};
pub use fast_marching::{solve_distance, FastMarching, SolveStats};
pub use oracle::dijkstra_oracle;

use serde::Serialize;

use crate::grid::{LiftedField, UNREACHED};
use crate::types::LiftedLandmark;

/// Distances from one seed; unreached nodes hold [`UNREACHED`].
#[derive(Debug, Clone)]
pub struct DistanceMap {
    pub field: LiftedField,
    pub seed: LiftedLandmark,
    pub stats: SolveStats,
}

impl DistanceMap {
    /// Value at the grid node nearest to `point`, `None` if unreached.
    pub fn at(&self, point: &LiftedLandmark) -> Option<f64> {
        let s = self.field.spec();
        let (i, j, k) = s.nearest_node(point.landmark.x, point.landmark.y, point.theta);
        let v = self.field.get(i, j, k);
        (v < UNREACHED).then_some(v)
    }

    pub fn reached(&self) -> usize {
        self.field.values().iter().filter(|&&v| v < UNREACHED).count()
    }
}

/// A minimal path sampled from target to seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicPath {
    /// `(x, y, θ)` samples, θ in `[0, π)`.
    pub points: Vec<[f64; 3]>,
    /// Metric length by midpoint quadrature.
    pub length: f64,
}
