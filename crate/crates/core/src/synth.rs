//! Synthetic vessel networks: random bounded-curvature trees rendered with a
//! Gaussian cross-section, plus exact landmark ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::types::{Landmark, LandmarkClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub n_trees: usize,
    /// Branch levels per tree; 1 is a single segment.
    pub depth: usize,
    /// Vessel width (FWHM of the cross-section) in pixels, sampled per branch.
    pub width_range: [f64; 2],
    /// Branch length range in pixels.
    pub length_range: [f64; 2],
    /// Maximum turning rate in radians per pixel.
    pub curvature_bound: f64,
    /// Chance that each tree after the first is required to cross an earlier one.
    pub crossing_probability: f64,
    pub noise_std: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            width: 256,
            height: 256,
            n_trees: 2,
            depth: 2,
            width_range: [2.0, 4.0],
            length_range: [40.0, 90.0],
            curvature_bound: 0.02,
            crossing_probability: 0.5,
            noise_std: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.width < 16 || self.height < 16 {
            return bad("image must be at least 16x16");
        }
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        let [w0, w1] = self.width_range;
        if !(w0 >= 1.0 && w1 >= w0 && w1.is_finite()) {
            return bad("widths must satisfy 1 <= min <= max");
        }
        let [l0, l1] = self.length_range;
        if !(l0 > 0.0 && l1 >= l0 && l1.is_finite()) {
            return bad("lengths must satisfy 0 < min <= max");
        }
        if !(self.curvature_bound >= 0.0 && self.curvature_bound.is_finite()) {
            return bad("curvature bound must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.crossing_probability) {
            return bad("crossing probability must lie in [0, 1]");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise std must be nonnegative");
        }
        Ok(())
    }
}

/// One branch: a polyline starting where its parent ended (or at the root).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub parent: Option<usize>,
    pub points: Vec<[f64; 2]>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTree {
    pub branches: Vec<Branch>,
}

impl SceneTree {
    fn children(&self, b: usize) -> usize {
        self.branches.iter().filter(|c| c.parent == Some(b)).count()
    }

    /// Root start and childless branch ends are endpoints; branch ends with
    /// two or more children are bifurcations.
    pub fn landmarks(&self) -> Vec<Landmark> {
        let mut out = Vec::new();
        for (b, br) in self.branches.iter().enumerate() {
            if br.parent.is_none() {
                let p = br.points[0];
                out.push(Landmark::new(p[0], p[1], LandmarkClass::Endpoint));
            }
            let p = *br.points.last().expect("nonempty branch");
            match self.children(b) {
                0 => out.push(Landmark::new(p[0], p[1], LandmarkClass::Endpoint)),
                1 => {}
                _ => out.push(Landmark::new(p[0], p[1], LandmarkClass::Bifurcation)),
            }
        }
        out
    }

    fn segments(&self) -> impl Iterator<Item = (usize, [f64; 2], [f64; 2], f64)> + '_ {
        self.branches.iter().enumerate().flat_map(|(b, br)| {
            br.points.windows(2).map(move |w| (b, w[0], w[1], br.width))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centerline {
    pub tree: usize,
    pub branch: usize,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub image: Raster,
    pub landmarks: Vec<Landmark>,
    pub centerlines: Vec<Centerline>,
    pub trees: Vec<SceneTree>,
}

const MARGIN: f64 = 4.0;
const STEP: f64 = 1.0;
const MAX_ATTEMPTS: usize = 200;

fn inside(p: [f64; 2], w: usize, h: usize) -> bool {
    p[0] >= MARGIN && p[1] >= MARGIN && p[0] <= w as f64 - 1.0 - MARGIN && p[1] <= h as f64 - 1.0 - MARGIN
}

fn grow_branch(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, start: [f64; 2], mut heading: f64) -> Vec<[f64; 2]> {
    let length = rng.random_range(spec.length_range[0]..=spec.length_range[1]);
    let n = (length / STEP).round().max(2.0) as usize;
    let turn = spec.curvature_bound * STEP;
    let mut pts = vec![start];
    let mut p = start;
    for _ in 0..n {
        if turn > 0.0 {
            heading += rng.random_range(-turn..=turn);
        }
        let q = [p[0] + STEP * heading.cos(), p[1] + STEP * heading.sin()];
        if !inside(q, spec.width, spec.height) {
            break;
        }
        pts.push(q);
        p = q;
    }
    pts
}

fn grow_tree(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Option<SceneTree> {
    let root = [
        rng.random_range(MARGIN..spec.width as f64 - 1.0 - MARGIN),
        rng.random_range(MARGIN..spec.height as f64 - 1.0 - MARGIN),
    ];
    // Start roughly toward the image center so branches have room to grow.
    let cx = spec.width as f64 / 2.0 - root[0];
    let cy = spec.height as f64 / 2.0 - root[1];
    let heading = cy.atan2(cx) + rng.random_range(-0.6..=0.6);
    let mut branches = Vec::new();
    let mut frontier = vec![(None, root, heading)];
    for level in 0..spec.depth {
        let mut next = Vec::new();
        for (parent, start, heading) in frontier {
            let points = grow_branch(rng, spec, start, heading);
            if points.len() < 2 || polyline_length(&points) < 0.5 * spec.length_range[0] {
                return None;
            }
            let width = rng.random_range(spec.width_range[0]..=spec.width_range[1]);
            let end = *points.last().unwrap();
            let n = points.len();
            let end_heading = (points[n - 1][1] - points[n - 2][1]).atan2(points[n - 1][0] - points[n - 2][0]);
            branches.push(Branch { parent, points, width });
            if level + 1 < spec.depth {
                let b = branches.len() - 1;
                let spread = rng.random_range(0.35..=0.8);
                next.push((Some(b), end, end_heading + spread));
                next.push((Some(b), end, end_heading - spread));
            }
        }
        frontier = next;
    }
    Some(SceneTree { branches })
}

pub fn polyline_length(points: &[[f64; 2]]) -> f64 {
    points.windows(2).map(|w| dist(w[0], w[1])).sum()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Proper intersection point of segments `ab` and `cd`, if any.
pub fn segment_intersection(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Option<[f64; 2]> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den.abs() < 1e-12 {
        return None;
    }
    let qp = [c[0] - a[0], c[1] - a[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / den;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / den;
    if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
        Some([a[0] + t * r[0], a[1] + t * r[1]])
    } else {
        None
    }
}

/// Crossings between centerlines of different trees, in deterministic order.
pub fn inter_tree_crossings(trees: &[SceneTree]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (ta, a) in trees.iter().enumerate() {
        for b in &trees[ta + 1..] {
            for (_, p0, p1, _) in a.segments() {
                for (_, q0, q1, _) in b.segments() {
                    if let Some(x) = segment_intersection(p0, p1, q0, q1) {
                        if out.iter().all(|&o| dist(o, x) > 2.0) {
                            out.push(x);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Whether two non-adjacent branches of one tree touch.
fn self_intersects(tree: &SceneTree) -> bool {
    let segs: Vec<_> = tree.segments().collect();
    for (i, &(bi, a0, a1, _)) in segs.iter().enumerate() {
        for &(bj, c0, c1, _) in &segs[i + 1..] {
            if bi == bj {
                continue;
            }
            let adjacent = tree.branches[bi].parent == Some(bj)
                || tree.branches[bj].parent == Some(bi)
                || (tree.branches[bi].parent.is_some() && tree.branches[bi].parent == tree.branches[bj].parent);
            if adjacent {
                continue;
            }
            if segment_intersection(a0, a1, c0, c1).is_some() {
                return true;
            }
        }
    }
    false
}

fn crosses_any(tree: &SceneTree, others: &[SceneTree]) -> bool {
    others
        .iter()
        .any(|o| !inter_tree_crossings(&[o.clone(), tree.clone()]).is_empty())
}

fn seg_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Distance from `p` to the nearest point of a polyline.
pub fn polyline_distance(p: [f64; 2], points: &[[f64; 2]]) -> f64 {
    match points.len() {
        0 => f64::INFINITY,
        1 => dist(p, points[0]),
        _ => points
            .windows(2)
            .map(|w| seg_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Renders explicit trees and derives their ground truth. Intensity is the
/// maximum over branches of a Gaussian profile in the distance to the centerline.
pub fn scene_from_trees(width: usize, height: usize, trees: Vec<SceneTree>, noise_std: f64, seed: u64) -> Result<SyntheticScene> {
    for t in &trees {
        for (b, br) in t.branches.iter().enumerate() {
            if br.points.is_empty() || br.parent.is_some_and(|p| p >= b) || !(br.width > 0.0) {
                return Err(Error::Config("malformed scene tree".into()));
            }
        }
    }
    let mut image = Raster::zeros(width, height);
    for t in &trees {
        for (_, a, b, w) in t.segments() {
            let sigma = w / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
            let reach = 3.5 * sigma + 1.0;
            let x0 = (a[0].min(b[0]) - reach).floor().max(0.0) as usize;
            let y0 = (a[1].min(b[1]) - reach).floor().max(0.0) as usize;
            let x1 = ((a[0].max(b[0]) + reach).ceil() as usize).min(width - 1);
            let y1 = ((a[1].max(b[1]) + reach).ceil() as usize).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d = seg_distance([x as f64, y as f64], a, b);
                    let v = (-d * d / (2.0 * sigma * sigma)).exp();
                    if v > image.get(x, y) {
                        image.set(x, y, v);
                    }
                }
            }
        }
    }
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_65);
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
        for v in &mut image.data {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    let mut landmarks: Vec<Landmark> = trees.iter().flat_map(|t| t.landmarks()).collect();
    landmarks.extend(
        inter_tree_crossings(&trees)
            .into_iter()
            .map(|p| Landmark::new(p[0], p[1], LandmarkClass::Crossing)),
    );
    let centerlines = trees
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| {
            t.branches.iter().enumerate().map(move |(bi, b)| Centerline {
                tree: ti,
                branch: bi,
                points: b.points.clone(),
            })
        })
        .collect();
    Ok(SyntheticScene {
        image,
        landmarks,
        centerlines,
        trees,
    })
}

/// Draws a random scene. Trees that self-intersect are redrawn; trees after
/// the first are redrawn until they cross (with `crossing_probability`) or
/// avoid all earlier trees.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trees: Vec<SceneTree> = Vec::new();
    for t in 0..spec.n_trees {
        let want_cross = t > 0 && rng.random_bool(spec.crossing_probability);
        let mut fallback = None;
        let mut chosen = None;
        for _ in 0..MAX_ATTEMPTS {
            let Some(tree) = grow_tree(&mut rng, spec) else { continue };
            if self_intersects(&tree) {
                continue;
            }
            if t == 0 || crosses_any(&tree, &trees) == want_cross {
                chosen = Some(tree);
                break;
            }
            fallback.get_or_insert(tree);
        }
        match chosen.or(fallback) {
            Some(tree) => trees.push(tree),
            None => {
                return Err(Error::Config(format!(
                    "synthetic tree {t} does not fit a {}x{} image; shorten length_range or lower depth",
                    spec.width, spec.height
                )))
            }
        }
    }
    scene_from_trees(spec.width, spec.height, trees, spec.noise_std, spec.seed)
}
