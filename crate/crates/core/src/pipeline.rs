//! End-to-end run: ingest → lift → cost → inject → pairwise distances →
//! clustering → vessel trees → artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eikonal::BacktrackParams;
use crate::error::Error;
use crate::graph::{
    build_vessel_trees, cluster_landmarks, pairwise_distances_with_maps, DegradedEdge, DistanceMatrix, TreeReport,
};
use crate::grid::{GridSpec, LiftedField};
use crate::io;
use crate::landmarks::{extract_landmarks, DetectionParams};
use crate::lift::{build_ulm_score, frangi_vesselness, lift_image, FrangiParams, LiftKernelParams, Trajectory};
use crate::metric::{cost_from_score, inject_landmarks, InjectParams};
use crate::raster::Raster;
use crate::render::{render_overlay, render_svg};
use crate::types::{Landmark, LiftedLandmark, MetricParams};

/// Upper bound on memory spent caching distance maps for backtracking.
const MAP_CACHE_BYTES: usize = 512 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Lift,
    Cost,
    Inject,
    Distances,
    Cluster,
    Trees,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    /// 2 input error, 3 numerical failure, 4 config error.
    pub fn exit_code(&self) -> i32 {
        match (&self.source, self.stage) {
            (Error::Config(_), _) => 4,
            (_, Stage::Ingest) => 2,
            (Error::Io { .. } | Error::Parse(_) | Error::EmptyInput(_), _) => 2,
            _ => 3,
        }
    }
}

trait Tag<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> Tag<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Required for trajectory input; must match the image otherwise.
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub n_theta: usize,
    pub spacing: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width: None,
            height: None,
            n_theta: 64,
            spacing: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub epsilon: f64,
    /// Defaults to N_x / (2π).
    pub xi: Option<f64>,
    pub lambda: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            epsilon: 0.1,
            xi: None,
            lambda: 1e3,
        }
    }
}

impl MetricConfig {
    pub fn resolve(&self, spec: &GridSpec) -> crate::Result<MetricParams> {
        let xi = self.xi.unwrap_or_else(|| MetricParams::defaults_for(spec).xi);
        MetricParams::new(self.epsilon, xi, self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

/// Clustering threshold in cost units, or `"auto"`: half the image diagonal
/// times the mean cost at on-vessel pixels (max over θ of W at least 0.5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SCluster {
    Value(f64),
    Auto(AutoKeyword),
}

/// Crop rectangle `[x, y, width, height]` applied on ingest.
pub type Crop = [usize; 4];

pub fn parse_crop(s: &str) -> crate::Result<Crop> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("crop must be x,y,w,h, got {s:?}")))?;
    <[usize; 4]>::try_from(parts).map_err(|_| Error::Config(format!("crop must be x,y,w,h, got {s:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub trajectories: Option<PathBuf>,
    /// Landmark JSON list; alternatively `heatmap` for extraction.
    #[serde(default)]
    pub landmarks: Option<PathBuf>,
    #[serde(default)]
    pub heatmap: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub crop: Option<Crop>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub lift: LiftKernelParams,
    /// Applied before lifting when present.
    #[serde(default)]
    pub frangi: Option<FrangiParams>,
    #[serde(default = "default_ulm_smoothing")]
    pub ulm_smoothing: f64,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub inject: InjectParams,
    #[serde(default)]
    pub detection: DetectionParams,
    pub s_cluster: SCluster,
    #[serde(default)]
    pub backtrack: BacktrackParams,
    #[serde(default)]
    pub seed: u64,
    /// Also write the score and cost fields as LFT1.
    #[serde(default)]
    pub write_fields: bool,
}

fn default_ulm_smoothing() -> f64 {
    1.5
}

impl PipelineConfig {
    pub fn new(output_dir: impl Into<PathBuf>, s_cluster: SCluster) -> Self {
        PipelineConfig {
            image: None,
            trajectories: None,
            landmarks: None,
            heatmap: None,
            output_dir: output_dir.into(),
            crop: None,
            grid: GridConfig::default(),
            lift: LiftKernelParams::default(),
            frangi: None,
            ulm_smoothing: default_ulm_smoothing(),
            metric: MetricConfig::default(),
            inject: InjectParams::default(),
            detection: DetectionParams::default(),
            s_cluster,
            backtrack: BacktrackParams::default(),
            seed: 0,
            write_fields: false,
        }
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks everything that does not need the inputs.
    pub fn validate(&self) -> crate::Result<()> {
        match (&self.image, &self.trajectories) {
            (Some(_), Some(_)) => return Err(Error::Config("give either image or trajectories, not both".into())),
            (None, None) => return Err(Error::Config("an image or trajectories input is required".into())),
            (None, Some(_)) if self.grid.width.is_none() || self.grid.height.is_none() => {
                return Err(Error::Config("trajectory input needs grid.width and grid.height".into()))
            }
            _ => {}
        }
        if self.landmarks.is_some() == self.heatmap.is_some() {
            return Err(Error::Config("give exactly one of landmarks or heatmap".into()));
        }
        if let Some([_, _, w, h]) = self.crop {
            if w < 2 || h < 2 {
                return Err(Error::Config("crop must be at least 2x2".into()));
            }
        }
        if self.grid.n_theta < 4 {
            return Err(Error::Config("grid.n_theta must be at least 4".into()));
        }
        if !(self.grid.spacing > 0.0) {
            return Err(Error::Config("grid.spacing must be positive".into()));
        }
        self.lift.validate()?;
        if let Some(f) = &self.frangi {
            f.validate()?;
        }
        if !(self.ulm_smoothing >= 0.0) {
            return Err(Error::Config("ulm_smoothing must be nonnegative".into()));
        }
        MetricParams::new(self.metric.epsilon, self.metric.xi.unwrap_or(1.0), self.metric.lambda)?;
        self.detection.validate()?;
        if let SCluster::Value(s) = self.s_cluster {
            if !(s > 0.0) {
                return Err(Error::Config(format!("s_cluster must be positive, got {s}")));
            }
        }
        if !(self.backtrack.step > 0.0 && self.backtrack.stop_radius > 0.0) {
            return Err(Error::Config("backtrack step and stop_radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub grid: GridSpec,
    pub metric: MetricParams,
    pub s_cluster: f64,
    pub lift_degenerate: bool,
    pub n_landmarks: usize,
    pub n_nodes: usize,
    pub low_confidence_nodes: usize,
    pub n_clusters: usize,
    pub cluster_sizes: Vec<usize>,
    pub max_row_asymmetry: f64,
    pub degraded_edges: Vec<DegradedEdge>,
    pub timings: Vec<StageTiming>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub nodes: Vec<LiftedLandmark>,
    pub matrix: DistanceMatrix,
    pub trees: TreeReport,
}

struct Clock {
    start: Instant,
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn new() -> Self {
        let now = Instant::now();
        Clock {
            start: now,
            last: now,
            timings: Vec::new(),
        }
    }

    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage,
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

enum Source {
    Image(Raster),
    Tracks(Vec<Trajectory>),
}

fn crop_raster(r: &Raster, crop: Option<Crop>) -> crate::Result<Raster> {
    match crop {
        None => Ok(r.clone()),
        Some([x, y, w, h]) => r.crop(x, y, w, h),
    }
}

fn ingest(cfg: &PipelineConfig) -> crate::Result<(Source, GridSpec, Vec<Landmark>)> {
    let (ox, oy) = cfg.crop.map_or((0.0, 0.0), |c| (c[0] as f64, c[1] as f64));
    let (source, width, height) = if let Some(path) = &cfg.image {
        let img = crop_raster(&io::read_gray(path)?, cfg.crop)?;
        let (w, h) = (img.width, img.height);
        if cfg.grid.width.is_some_and(|gw| gw != w) || cfg.grid.height.is_some_and(|gh| gh != h) {
            return Err(Error::Config(format!("grid size does not match the {w}x{h} input image")));
        }
        (Source::Image(img), w, h)
    } else {
        let path = cfg.trajectories.as_ref().expect("validated");
        let (w, h) = match cfg.crop {
            Some([_, _, w, h]) => (w, h),
            None => (cfg.grid.width.unwrap(), cfg.grid.height.unwrap()),
        };
        let mut tracks = io::read_trajectories(path)?;
        for t in &mut tracks {
            for p in &mut t.points {
                p.x -= ox;
                p.y -= oy;
            }
        }
        (Source::Tracks(tracks), w, h)
    };
    let spec = GridSpec::with_spacing(width, height, cfg.grid.n_theta, cfg.grid.spacing)?;
    let landmarks = match (&cfg.landmarks, &cfg.heatmap) {
        (Some(path), _) => {
            let all: Vec<Landmark> = io::read_json(path)?;
            let inside = |l: &Landmark| {
                let (x, y) = (l.x - ox, l.y - oy);
                x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64
            };
            let kept: Vec<Landmark> = all
                .iter()
                .filter(|l| cfg.crop.is_none() || inside(l))
                .map(|l| Landmark { x: l.x - ox, y: l.y - oy, ..*l })
                .collect();
            for l in &kept {
                l.validate(&spec)?;
            }
            kept
        }
        (None, Some(path)) => {
            let mut hm = io::read_heatmap(path)?;
            if cfg.crop.is_some() {
                for ch in &mut hm.channels {
                    *ch = crop_raster(ch, cfg.crop)?;
                }
            }
            if hm.width() != width || hm.height() != height {
                return Err(Error::Config(format!(
                    "heatmap is {}x{}, input is {width}x{height}",
                    hm.width(),
                    hm.height()
                )));
            }
            extract_landmarks(&hm, &cfg.detection)?
        }
        (None, None) => unreachable!("validated"),
    };
    Ok((source, spec, landmarks))
}

/// Mean cost over pixels whose best orientation has W ≥ 0.5; falls back to
/// the mean over all nodes.
fn auto_s_cluster(w: &LiftedField, params: &MetricParams) -> f64 {
    let spec = w.spec();
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..spec.width {
        for j in 0..spec.height {
            let best = w.column(i, j).iter().copied().fold(0.0f64, f64::max);
            if best >= 0.5 {
                sum += 1.0 / (1.0 + params.lambda * best * best);
                n += 1;
            }
        }
    }
    let mean = if n > 0 {
        sum / n as f64
    } else {
        w.values().iter().map(|v| 1.0 / (1.0 + params.lambda * v * v)).sum::<f64>() / w.values().len() as f64
    };
    let (ex, ey) = spec.extent();
    0.5 * ex.hypot(ey) * mean
}

/// Max-over-θ projection of a lifted field, used as overlay base for ULM input.
fn project_max(w: &LiftedField) -> Raster {
    let spec = w.spec();
    Raster::from_fn(spec.width, spec.height, |x, y| {
        w.column(x, y).iter().copied().fold(0.0f64, f64::max)
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    let mut clock = Clock::new();
    cfg.validate().at(Stage::Config)?;
    clock.lap(Stage::Config);

    let (source, spec, landmarks) = ingest(cfg).at(Stage::Ingest)?;
    clock.lap(Stage::Ingest);

    let (score, lift_degenerate, base) = match &source {
        Source::Image(img) => {
            let pre = match &cfg.frangi {
                Some(f) => frangi_vesselness(img, f).at(Stage::Lift)?,
                None => img.clone(),
            };
            let n = lift_image(&pre, &spec, &cfg.lift).at(Stage::Lift)?;
            (n.field, n.degenerate, img.clone())
        }
        Source::Tracks(tracks) => {
            let w = build_ulm_score(tracks, &spec, cfg.ulm_smoothing).at(Stage::Lift)?;
            let base = project_max(&w);
            (w, false, base)
        }
    };
    if lift_degenerate {
        log::warn!("lifted score is constant; cost will be uniform");
    }
    clock.lap(Stage::Lift);

    let params = cfg.metric.resolve(&spec).at(Stage::Cost)?;
    let s_cluster = match cfg.s_cluster {
        SCluster::Value(s) => s,
        SCluster::Auto(_) => auto_s_cluster(&score, &params),
    };
    clock.lap(Stage::Cost);

    let injected = inject_landmarks(&score, &landmarks, &cfg.inject).at(Stage::Inject)?;
    let cost = cost_from_score(&injected.score, &params);
    let nodes = injected.lifted;
    clock.lap(Stage::Inject);

    let keep = (MAP_CACHE_BYTES / (8 * spec.len()).max(1)).min(nodes.len());
    let (matrix, cache) = pairwise_distances_with_maps(&cost, &params, &nodes, keep).at(Stage::Distances)?;
    clock.lap(Stage::Distances);

    let clustering = cluster_landmarks(&matrix, s_cluster).at(Stage::Cluster)?;
    clock.lap(Stage::Cluster);

    let trees = build_vessel_trees(&cost, &params, &matrix, &clustering, &cache, &cfg.backtrack).at(Stage::Trees)?;
    drop(cache);
    clock.lap(Stage::Trees);

    let out = &cfg.output_dir;
    let write = || -> crate::Result<()> {
        io::write_bytes(out.join("matrix.csv"), matrix.to_csv().as_bytes())?;
        io::write_json(out.join("nodes.json"), &nodes)?;
        io::write_json(out.join("trees.json"), &trees)?;
        let overlay = render_overlay(&base, &trees.clusters, &landmarks);
        overlay.save_png(out.join("overlay.png"))?;
        io::write_gray(out.join("base.png"), &base)?;
        let svg = render_svg(spec.width, spec.height, Some("base.png"), &trees.clusters, &landmarks);
        io::write_bytes(out.join("overlay.svg"), svg.as_bytes())?;
        if cfg.write_fields {
            io::write_lft1(out.join("score.lft"), &injected.score)?;
            io::write_lft1(out.join("cost.lft"), cost.field())?;
        }
        Ok(())
    };
    write().at(Stage::Write)?;
    clock.lap(Stage::Write);

    let report = RunReport {
        config: cfg.clone(),
        grid: spec,
        metric: params,
        s_cluster,
        lift_degenerate,
        n_landmarks: landmarks.len(),
        n_nodes: nodes.len(),
        low_confidence_nodes: nodes.iter().filter(|n| n.low_confidence).count(),
        n_clusters: clustering.n_clusters(),
        cluster_sizes: (0..clustering.n_clusters()).map(|c| clustering.members(c).len()).collect(),
        max_row_asymmetry: matrix.max_asymmetry(),
        degraded_edges: trees.degraded.clone(),
        wall_seconds: (clock.last - clock.start).as_secs_f64(),
        timings: clock.timings,
    };
    io::write_json(out.join("report.json"), &report).at(Stage::Write)?;
    Ok(RunOutcome {
        report,
        nodes,
        matrix,
        trees,
    })
}
