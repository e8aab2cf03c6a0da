//! Orientation score from microbubble trajectories.

use serde::{Deserialize, Serialize};

use super::conv::{gaussian_1d, separable_zero_pad};
use super::normalize_score;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, LiftedField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub track_id: i64,
    pub points: Vec<TrajectoryPoint>,
}

/// Builds W from trajectory points binned at `(x, y, atan2(vy, vx) mod π)`.
///
/// Every valid point carries unit weight. Points outside the grid or with zero
/// velocity are skipped.
pub fn build_ulm_score(trajectories: &[Trajectory], spec: &GridSpec, smoothing: f64) -> Result<LiftedField> {
    spec.validate()?;
    if !(smoothing >= 0.0) {
        return Err(Error::Config(format!("smoothing must be nonnegative, got {smoothing}")));
    }
    let mut hist = LiftedField::zeros(*spec);
    let mut used = 0usize;
    for p in trajectories.iter().flat_map(|t| &t.points) {
        if !spec.contains(p.x, p.y) || (p.vx == 0.0 && p.vy == 0.0) || !p.vx.is_finite() || !p.vy.is_finite() {
            continue;
        }
        let (i, j, k) = spec.nearest_node(p.x, p.y, p.vy.atan2(p.vx));
        let v = hist.get(i, j, k);
        hist.set(i, j, k, v + 1.0);
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyInput("no trajectory point with nonzero velocity inside the grid".into()));
    }

    let smoothed = if smoothing > 0.0 {
        let sigma = smoothing / spec.spacing;
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        let g = gaussian_1d(sigma, radius);
        let mut out = LiftedField::zeros(*spec);
        for k in 0..spec.n_theta {
            let src = &hist;
            separable_zero_pad(
                spec.width,
                spec.height,
                &g,
                &g,
                |i, j| src.get(i, j, k),
                |i, j, v| out.set(i, j, k, v),
            );
        }
        out
    } else {
        hist
    };

    let n = spec.n_theta;
    let mut angular = LiftedField::zeros(*spec);
    for i in 0..spec.width {
        for j in 0..spec.height {
            let src = smoothed.column(i, j);
            let dst = angular.column_mut(i, j);
            for k in 0..n {
                dst[k] = 0.25 * src[(k + n - 1) % n] + 0.5 * src[k] + 0.25 * src[(k + 1) % n];
            }
        }
    }
    Ok(normalize_score(&angular).field)
}
