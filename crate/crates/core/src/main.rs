use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vesseltree::eikonal::{dijkstra_oracle, FastMarching};
use vesseltree::graph::TreeReport;
use vesseltree::landmarks::{heatmap_targets, match_and_score, DetectionParams};
use vesseltree::lift::{build_ulm_score, frangi_vesselness, lift_image, FrangiParams, LiftKernelParams};
use vesseltree::metric::{cost_from_score, inject_landmarks, CostField, InjectParams};
use vesseltree::pipeline::{parse_crop, run_pipeline, Crop, MetricConfig, PipelineConfig, SCluster};
use vesseltree::render::{render_overlay, render_svg};
use vesseltree::synth::{synth_generate, SyntheticSpec};
use vesseltree::types::{Landmark, LiftedLandmark};
use vesseltree::{io, Error, GridSpec};

#[derive(Parser)]
#[command(name = "vesseltree", version, about = "Geodesic vessel tracking in positions × orientations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic vessel image with landmark ground truth.
    Synth(SynthArgs),
    /// Lift an image or ULM trajectories to an orientation score (LFT1).
    Lift(LiftArgs),
    /// Turn a score into a cost field, optionally injecting landmarks first.
    Cost(CostArgs),
    /// Run the full tracking pipeline.
    Track(TrackArgs),
    /// Score predicted landmarks against ground truth.
    Eval(EvalArgs),
    /// Compare fast marching with the Dijkstra oracle on a cost field.
    Oracle(OracleArgs),
    /// Draw trees and landmarks over an image (PNG and SVG).
    Render(RenderArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON synthetic spec; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    crossing_probability: Option<f64>,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long, conflicts_with = "trajectories", required_unless_present = "trajectories")]
    image: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<PathBuf>,
    /// Output LFT1 file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    n_theta: usize,
    /// Grid size for trajectory input.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_parser = parse_crop_arg)]
    crop: Option<Crop>,
    /// Apply Frangi vesselness before lifting.
    #[arg(long)]
    frangi: bool,
    #[arg(long)]
    dark_vessels: bool,
    #[arg(long, default_value_t = 6.0)]
    sigma_long: f64,
    #[arg(long, default_value_t = 1.5)]
    sigma_short: f64,
    #[arg(long, default_value_t = 18)]
    support_radius: usize,
    #[arg(long, default_value_t = 1.5)]
    smoothing: f64,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Defaults to width / (2π).
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = 1e3)]
    lambda: f64,
}

impl MetricArgs {
    fn config(&self) -> MetricConfig {
        MetricConfig {
            epsilon: self.epsilon,
            xi: self.xi,
            lambda: self.lambda,
        }
    }
}

#[derive(Args)]
struct CostArgs {
    /// Score field (LFT1).
    #[arg(long)]
    score: PathBuf,
    /// Output cost field (LFT1).
    #[arg(long)]
    out: PathBuf,
    /// Landmarks to inject; lifted nodes go to `--nodes`.
    #[arg(long)]
    landmarks: Option<PathBuf>,
    #[arg(long, requires = "landmarks")]
    nodes: Option<PathBuf>,
    #[command(flatten)]
    metric: MetricArgs,
}

#[derive(Args)]
struct TrackArgs {
    /// Pipeline config (JSON); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    landmarks: Option<PathBuf>,
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_crop_arg)]
    crop: Option<Crop>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    /// A number in cost units, or `auto`.
    #[arg(long)]
    s_cluster: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    match_radius: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Cost field (LFT1).
    #[arg(long)]
    cost: PathBuf,
    /// Seed as `x,y,theta`.
    #[arg(long, value_parser = parse_point)]
    seed: [f64; 3],
    /// Targets as `x,y,theta`; repeatable.
    #[arg(long, value_parser = parse_point, required = true)]
    target: Vec<[f64; 3]>,
    #[arg(long, default_value_t = 3.0)]
    radius: f64,
    #[command(flatten)]
    metric: MetricArgs,
    /// Also write both distance maps under this stem.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    trees: Option<PathBuf>,
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Output PNG; an SVG is written next to it.
    #[arg(long)]
    out: PathBuf,
}

fn parse_crop_arg(s: &str) -> Result<Crop, String> {
    parse_crop(s).map_err(|e| e.to_string())
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| format!("expected x,y,theta, got {s:?}"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 4,
        Error::Io { .. } | Error::Parse(_) | Error::EmptyInput(_) => 2,
        _ => 3,
    }
}

fn synth(a: SynthArgs) -> vesseltree::Result<()> {
    let mut spec: SyntheticSpec = match &a.config {
        Some(p) => io::read_json(p).map_err(|e| Error::Config(e.to_string()))?,
        None => SyntheticSpec::default(),
    };
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.width {
        spec.width = v;
    }
    if let Some(v) = a.height {
        spec.height = v;
    }
    if let Some(v) = a.trees {
        spec.n_trees = v;
    }
    if let Some(v) = a.depth {
        spec.depth = v;
    }
    if let Some(v) = a.noise {
        spec.noise_std = v;
    }
    if let Some(v) = a.crossing_probability {
        spec.crossing_probability = v;
    }
    let scene = synth_generate(&spec)?;
    io::write_gray(a.out.join("image.png"), &scene.image)?;
    io::write_json(a.out.join("landmarks.json"), &scene.landmarks)?;
    io::write_json(a.out.join("centerlines.json"), &scene.centerlines)?;
    io::write_json(a.out.join("spec.json"), &spec)?;
    let hm = heatmap_targets(&scene.landmarks, spec.width, spec.height, &DetectionParams::default())?;
    io::write_heatmap_tiff(a.out.join("heatmap.tif"), &hm)?;
    println!(
        "{}",
        json!({"landmarks": scene.landmarks.len(), "centerlines": scene.centerlines.len(), "trees": scene.trees.len()})
    );
    Ok(())
}

fn lift(a: LiftArgs) -> vesseltree::Result<()> {
    let field = if let Some(path) = &a.image {
        let mut img = io::read_gray(path)?;
        if let Some([x, y, w, h]) = a.crop {
            img = img.crop(x, y, w, h)?;
        }
        if a.frangi {
            let p = FrangiParams {
                dark_vessels: a.dark_vessels,
                ..Default::default()
            };
            img = frangi_vesselness(&img, &p)?;
        }
        let spec = GridSpec::new(img.width, img.height, a.n_theta)?;
        let params = LiftKernelParams {
            sigma_long: a.sigma_long,
            sigma_short: a.sigma_short,
            support_radius: a.support_radius,
        };
        let n = lift_image(&img, &spec, &params)?;
        if n.degenerate {
            log::warn!("lifted score is constant");
        }
        n.field
    } else {
        let path = a.trajectories.as_ref().expect("clap enforces an input");
        let mut tracks = io::read_trajectories(path)?;
        let (w, h) = match (a.crop, a.width, a.height) {
            (Some([x, y, w, h]), _, _) => {
                for p in tracks.iter_mut().flat_map(|t| t.points.iter_mut()) {
                    p.x -= x as f64;
                    p.y -= y as f64;
                }
                (w, h)
            }
            (None, Some(w), Some(h)) => (w, h),
            _ => return Err(Error::Config("trajectory input needs --width and --height (or --crop)".into())),
        };
        build_ulm_score(&tracks, &GridSpec::new(w, h, a.n_theta)?, a.smoothing)?
    };
    io::write_lft1(&a.out, &field)
}

fn cost(a: CostArgs) -> vesseltree::Result<()> {
    let score = io::read_lft1(&a.score)?;
    let params = a.metric.config().resolve(score.spec())?;
    let (score, nodes) = match &a.landmarks {
        Some(p) => {
            let lms: Vec<Landmark> = io::read_json(p)?;
            let inj = inject_landmarks(&score, &lms, &InjectParams::default())?;
            (inj.score, Some(inj.lifted))
        }
        None => (score, None),
    };
    io::write_lft1(&a.out, cost_from_score(&score, &params).field())?;
    if let (Some(path), Some(nodes)) = (&a.nodes, &nodes) {
        io::write_json(path, nodes)?;
    }
    Ok(())
}

fn track(a: TrackArgs) -> Result<(), (u8, String)> {
    let cfg_err = |e: Error| (4u8, format!("[config] {e}"));
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => (2, format!("[ingest] {e}")),
            e => cfg_err(e),
        })?,
        None => {
            let out = a.out.clone().ok_or_else(|| cfg_err(Error::Config("--out or --config is required".into())))?;
            let s = a
                .s_cluster
                .clone()
                .ok_or_else(|| cfg_err(Error::Config("--s-cluster or --config is required".into())))?;
            PipelineConfig::new(out, parse_s_cluster(&s).map_err(cfg_err)?)
        }
    };
    if a.image.is_some() {
        cfg.image = a.image;
        cfg.trajectories = None;
    }
    if a.trajectories.is_some() {
        cfg.trajectories = a.trajectories;
        cfg.image = None;
    }
    if a.landmarks.is_some() {
        cfg.landmarks = a.landmarks;
        cfg.heatmap = None;
    }
    if a.heatmap.is_some() {
        cfg.heatmap = a.heatmap;
        cfg.landmarks = None;
    }
    if let Some(v) = a.out {
        cfg.output_dir = v;
    }
    if a.crop.is_some() {
        cfg.crop = a.crop;
    }
    if let Some(v) = a.n_theta {
        cfg.grid.n_theta = v;
    }
    if let Some(v) = a.epsilon {
        cfg.metric.epsilon = v;
    }
    if a.xi.is_some() {
        cfg.metric.xi = a.xi;
    }
    if let Some(s) = &a.s_cluster {
        cfg.s_cluster = parse_s_cluster(s).map_err(cfg_err)?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let outcome = run_pipeline(&cfg).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let r = &outcome.report;
    println!(
        "{}",
        json!({
            "clusters": r.n_clusters,
            "nodes": r.n_nodes,
            "degraded_edges": r.degraded_edges.len(),
            "wall_seconds": r.wall_seconds,
            "output_dir": cfg.output_dir,
        })
    );
    Ok(())
}

fn parse_s_cluster(s: &str) -> vesseltree::Result<SCluster> {
    serde_json::from_str(s)
        .or_else(|_| serde_json::from_value(json!(s)))
        .map_err(|_| Error::Config(format!("s_cluster must be a number or \"auto\", got {s:?}")))
}

fn eval(a: EvalArgs) -> vesseltree::Result<()> {
    let pred: Vec<Landmark> = io::read_json(&a.predicted)?;
    let truth: Vec<Landmark> = io::read_json(&a.truth)?;
    let params = DetectionParams {
        match_radius: a.match_radius,
        ..Default::default()
    };
    params.validate()?;
    let report = match_and_score(&pred, &truth, &params);
    match &a.out {
        Some(p) => io::write_json(p, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?);
            Ok(())
        }
    }
}

fn oracle(a: OracleArgs) -> vesseltree::Result<()> {
    let cost = CostField::new(io::read_lft1(&a.cost)?)?;
    let params = a.metric.config().resolve(cost.spec())?;
    let seed = LiftedLandmark::at(a.seed[0], a.seed[1], a.seed[2]);
    let targets: Vec<LiftedLandmark> = a.target.iter().map(|t| LiftedLandmark::at(t[0], t[1], t[2])).collect();
    let fm = FastMarching::new(&cost, &params)?.solve(&seed)?;
    let dj = dijkstra_oracle(&cost, &params, &seed, a.radius)?;
    let rows: Vec<_> = targets
        .iter()
        .zip(&a.target)
        .map(|(t, raw)| {
            let (u, o) = (fm.at(t), dj.at(t));
            let rel = match (u, o) {
                (Some(u), Some(o)) if o > 0.0 => Some((u - o) / o),
                _ => None,
            };
            json!({"target": raw, "fast_marching": u, "oracle": o, "relative_difference": rel})
        })
        .collect();
    if let Some(stem) = &a.out {
        let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        io::write_distance_map(stem.with_file_name(format!("{name}_fm")), &fm, &params)?;
        io::write_distance_map(stem.with_file_name(format!("{name}_oracle")), &dj, &params)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({"stats": fm.stats, "targets": rows})).map_err(|e| Error::Parse(e.to_string()))?
    );
    Ok(())
}

fn render(a: RenderArgs) -> vesseltree::Result<()> {
    let base = io::read_gray(&a.image)?;
    let trees: TreeReport = match &a.trees {
        Some(p) => io::read_json(p)?,
        None => TreeReport {
            clusters: Vec::new(),
            degraded: Vec::new(),
        },
    };
    let lms: Vec<Landmark> = match &a.landmarks {
        Some(p) => io::read_json(p)?,
        None => Vec::new(),
    };
    render_overlay(&base, &trees.clusters, &lms).save_png(&a.out)?;
    let href = a.image.canonicalize().unwrap_or_else(|_| a.image.clone());
    let svg = render_svg(base.width, base.height, Some(&href.to_string_lossy()), &trees.clusters, &lms);
    io::write_bytes(a.out.with_extension("svg"), svg.as_bytes())
}

fn configure_threads() {
    if let Ok(v) = std::env::var("VESSELTREE_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the worker pool: {e}");
                }
            }
            _ => log::warn!("ignoring VESSELTREE_THREADS={v:?}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    configure_threads();
    let tagged = |stage: &str, r: vesseltree::Result<()>| r.map_err(|e| (exit_code(&e), format!("[{stage}] {e}")));
    let result = match cli.command {
        Command::Synth(a) => tagged("synth", synth(a)),
        Command::Lift(a) => tagged("lift", lift(a)),
        Command::Cost(a) => tagged("cost", cost(a)),
        Command::Track(a) => track(a),
        Command::Eval(a) => tagged("eval", eval(a)),
        Command::Oracle(a) => tagged("oracle", oracle(a)),
        Command::Render(a) => tagged("render", render(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
