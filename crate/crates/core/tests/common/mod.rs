#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vesseltree::grid::{GridSpec, LiftedField};
use vesseltree::metric::CostField;
use vesseltree::types::LiftedLandmark;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive cost `exp(Σ aₘ sin(...))` built from a few low-frequency modes,
/// periodic in θ with period π. Values stay within roughly [0.3, 3].
pub fn smooth_cost(spec: GridSpec, seed: u64) -> CostField {
    let mut r = rng(seed);
    let modes: Vec<(f64, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                r.random_range(-0.3..0.3),
                r.random_range(0..=2) as f64,
                r.random_range(0..=2) as f64,
                r.random_range(0..=1) as f64,
                r.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let (w, h) = (spec.width as f64, spec.height as f64);
    let field = LiftedField::from_fn(spec, |i, j, k| {
        let th = spec.theta(k);
        let s: f64 = modes
            .iter()
            .map(|&(a, fx, fy, ft, ph)| {
                a * (2.0 * PI * (fx * i as f64 / w + fy * j as f64 / h) + 2.0 * ft * th + ph).sin()
            })
            .sum();
        s.exp()
    });
    CostField::new(field).unwrap()
}

/// A random grid node.
pub fn random_node(r: &mut ChaCha8Rng, spec: &GridSpec) -> LiftedLandmark {
    let i = r.random_range(0..spec.width);
    let j = r.random_range(0..spec.height);
    let k = r.random_range(0..spec.n_theta);
    LiftedLandmark::at(i as f64, j as f64, spec.theta(k))
}

/// A pair of nodes at least `min_sep` pixels apart in the plane.
pub fn random_pair(r: &mut ChaCha8Rng, spec: &GridSpec, min_sep: f64) -> (LiftedLandmark, LiftedLandmark) {
    loop {
        let a = random_node(r, spec);
        let b = random_node(r, spec);
        if (a.landmark.x - b.landmark.x).hypot(a.landmark.y - b.landmark.y) >= min_sep {
            return (a, b);
        }
    }
}

pub fn seg_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * ab[0]).hypot(p[1] - a[1] - t * ab[1])
}

pub fn polyline_distance(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    if line.len() == 1 {
        return (p[0] - line[0][0]).hypot(p[1] - line[0][1]);
    }
    line.windows(2).map(|w| seg_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between two polylines, with both sampled
/// densely along their segments.
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let dense = |l: &[[f64; 2]]| -> Vec<[f64; 2]> {
        let mut out = vec![l[0]];
        for w in l.windows(2) {
            let n = ((w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) / 0.25).ceil().max(1.0) as usize;
            for s in 1..=n {
                let t = s as f64 / n as f64;
                out.push([w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])]);
            }
        }
        out
    };
    let one_way = |x: &[[f64; 2]], y: &[[f64; 2]]| dense(x).iter().map(|&p| polyline_distance(p, y)).fold(0.0, f64::max);
    one_way(a, b).max(one_way(b, a))
}
