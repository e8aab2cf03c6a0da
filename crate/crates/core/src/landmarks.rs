//! Landmark heatmaps: training targets, peak extraction and detection scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::types::{Landmark, LandmarkClass};

pub const CHANNEL_NAMES: [&str; 4] = ["endpoint", "bifurcation", "crossing", "relaxed"];

/// Four-channel landmark heatmap: endpoint, bifurcation, crossing, relaxed.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub channels: [Raster; 4],
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Heatmap {
            channels: std::array::from_fn(|_| Raster::zeros(width, height)),
        }
    }

    pub fn width(&self) -> usize {
        self.channels[0].width
    }

    pub fn height(&self) -> usize {
        self.channels[0].height
    }

    pub fn class_channel(&self, class: LandmarkClass) -> &Raster {
        &self.channels[class.channel()]
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        if self.channels.iter().any(|c| c.width != w || c.height != h) {
            return Err(Error::Config("heatmap channels differ in size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionParams {
    /// Std of the target Gaussians (pixels).
    pub sigma: f64,
    /// Detection threshold in (0, 1).
    pub r: f64,
    pub nms_radius: f64,
    pub match_radius: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            sigma: 2.0,
            r: 0.5,
            nms_radius: 3.0,
            match_radius: 5.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::Config(format!("threshold r must lie in (0, 1], got {}", self.r)));
        }
        if !(self.nms_radius >= 1.0 && self.match_radius >= 1.0) {
            return Err(Error::Config("nms and match radii must be at least 1".into()));
        }
        Ok(())
    }
}

/// Peak-normalized Gaussian targets per class, clamped to 1; the relaxed
/// channel is the pointwise max of the class channels.
pub fn heatmap_targets(landmarks: &[Landmark], width: usize, height: usize, params: &DetectionParams) -> Result<Heatmap> {
    params.validate()?;
    let mut hm = Heatmap::zeros(width, height);
    let reach = (6.0 * params.sigma).ceil() as isize;
    let inv = 1.0 / (2.0 * params.sigma * params.sigma);
    for l in landmarks {
        if !(l.x >= 0.0 && l.y >= 0.0 && l.x <= (width - 1) as f64 && l.y <= (height - 1) as f64) {
            return Err(Error::Domain(format!("landmark ({}, {}) outside {width}x{height}", l.x, l.y)));
        }
        let ch = &mut hm.channels[l.class.channel()];
        let (cx, cy) = (l.x.round() as isize, l.y.round() as isize);
        for y in (cy - reach).max(0)..=(cy + reach).min(height as isize - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(width as isize - 1) {
                let d2 = (x as f64 - l.x).powi(2) + (y as f64 - l.y).powi(2);
                let v = ch.get(x as usize, y as usize) + (-d2 * inv).exp();
                ch.set(x as usize, y as usize, v);
            }
        }
    }
    for c in 0..3 {
        hm.channels[c].data.iter_mut().for_each(|v| *v = v.min(1.0));
    }
    let relaxed: Vec<f64> = (0..width * height)
        .map(|i| hm.channels[0].data[i].max(hm.channels[1].data[i]).max(hm.channels[2].data[i]))
        .collect();
    hm.channels[3].data = relaxed;
    Ok(hm)
}

/// Thresholds each class channel at `r` and keeps strict local maxima within
/// `nms_radius`; equal values go to the lexicographically smallest `(x, y)`.
pub fn extract_landmarks(heatmap: &Heatmap, params: &DetectionParams) -> Result<Vec<Landmark>> {
    params.validate()?;
    heatmap.validate()?;
    let (w, h) = (heatmap.width() as isize, heatmap.height() as isize);
    let rad = params.nms_radius.floor() as isize;
    let r2 = params.nms_radius * params.nms_radius;
    let mut out = Vec::new();
    for class in LandmarkClass::ALL {
        let ch = heatmap.class_channel(class);
        let val = |x: isize, y: isize| {
            let v = ch.get(x as usize, y as usize);
            if v >= params.r {
                v
            } else {
                0.0
            }
        };
        for x in 0..w {
            for y in 0..h {
                let v = val(x, y);
                if v <= 0.0 {
                    continue;
                }
                let mut is_max = true;
                'scan: for dx in -rad..=rad {
                    for dy in -rad..=rad {
                        if (dx == 0 && dy == 0) || ((dx * dx + dy * dy) as f64) > r2 {
                            continue;
                        }
                        let (qx, qy) = (x + dx, y + dy);
                        if qx < 0 || qy < 0 || qx >= w || qy >= h {
                            continue;
                        }
                        let q = val(qx, qy);
                        if q > v || (q == v && (qx, qy) < (x, y)) {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if is_max {
                    out.push(Landmark {
                        x: x as f64,
                        y: y as f64,
                        class,
                        confidence: v.clamp(0.0, 1.0),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Scores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Scores {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub per_class: BTreeMap<String, Scores>,
    /// Micro-average over the class-aware matches.
    pub aggregate: Scores,
    /// Matching that ignores classes.
    pub class_agnostic: Scores,
}

/// Greedy matching in increasing distance; returns the number of matches.
fn greedy_matches(pred: &[&Landmark], truth: &[&Landmark], radius: f64) -> usize {
    let mut pairs = Vec::new();
    for (a, p) in pred.iter().enumerate() {
        for (b, t) in truth.iter().enumerate() {
            let d = ((p.x - t.x).powi(2) + (p.y - t.y).powi(2)).sqrt();
            if d <= radius {
                pairs.push((d, a, b));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_p = vec![false; pred.len()];
    let mut used_t = vec![false; truth.len()];
    let mut matched = 0;
    for (_, a, b) in pairs {
        if !used_p[a] && !used_t[b] {
            used_p[a] = true;
            used_t[b] = true;
            matched += 1;
        }
    }
    matched
}

pub fn match_and_score(predicted: &[Landmark], truth: &[Landmark], params: &DetectionParams) -> DetectionReport {
    let mut per_class = BTreeMap::new();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for class in LandmarkClass::ALL {
        let p: Vec<&Landmark> = predicted.iter().filter(|l| l.class == class).collect();
        let t: Vec<&Landmark> = truth.iter().filter(|l| l.class == class).collect();
        let m = greedy_matches(&p, &t, params.match_radius);
        let s = Scores::from_counts(m, p.len() - m, t.len() - m);
        tp += s.tp;
        fp += s.fp;
        fn_ += s.fn_;
        per_class.insert(class.as_str().to_string(), s);
    }
    let all_p: Vec<&Landmark> = predicted.iter().collect();
    let all_t: Vec<&Landmark> = truth.iter().collect();
    let m = greedy_matches(&all_p, &all_t, params.match_radius);
    DetectionReport {
        per_class,
        aggregate: Scores::from_counts(tp, fp, fn_),
        class_agnostic: Scores::from_counts(m, predicted.len() - m, truth.len() - m),
    }
}
