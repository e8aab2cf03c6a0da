use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vesseltree::io;
use vesseltree::landmarks::{heatmap_targets, DetectionParams};
use vesseltree::lift::{Trajectory, TrajectoryPoint};
use vesseltree::pipeline::{run_pipeline, PipelineConfig, SCluster};
use vesseltree::synth::{scene_from_trees, Branch, SceneTree, SyntheticScene};
use vesseltree::types::Landmark;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vesseltree"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("VESSELTREE_THREADS", "1").output().expect("spawn")
}

fn y_scene() -> SyntheticScene {
    let root = Branch { parent: None, points: vec![[10.0, 40.0], [40.0, 40.0]], width: 3.0 };
    let up = Branch { parent: Some(0), points: vec![[40.0, 40.0], [68.0, 14.0]], width: 3.0 };
    let down = Branch { parent: Some(0), points: vec![[40.0, 40.0], [68.0, 66.0]], width: 3.0 };
    scene_from_trees(80, 80, vec![SceneTree { branches: vec![root, up, down] }], 0.0, 0).unwrap()
}

/// Writes the Y scene and returns (image, landmarks) paths.
fn write_scene(dir: &Path) -> (PathBuf, PathBuf) {
    let s = y_scene();
    let (img, lms) = (dir.join("y.png"), dir.join("y.json"));
    io::write_gray(&img, &s.image).unwrap();
    io::write_json(&lms, &s.landmarks).unwrap();
    (img, lms)
}

fn config(dir: &Path, out: &str) -> PipelineConfig {
    let (img, lms) = write_scene(dir);
    let mut cfg = PipelineConfig::new(dir.join(out), SCluster::Value(0.5));
    cfg.image = Some(img);
    cfg.landmarks = Some(lms);
    cfg.grid.n_theta = 16;
    cfg
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn y_vessel_gives_one_three_edge_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(&config(dir.path(), "out")).unwrap();
    assert_eq!(out.trees.clusters.len(), 1);
    assert_eq!(out.trees.clusters[0].edges.len(), 3);
    assert!(out.trees.degraded.is_empty());
    let scene = y_scene();
    for e in &out.trees.clusters[0].edges {
        let mean = e
            .polyline
            .iter()
            .map(|q| {
                scene
                    .centerlines
                    .iter()
                    .map(|c| vesseltree::synth::polyline_distance([q[0], q[1]], &c.points))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / e.polyline.len() as f64;
        assert!(mean <= 2.0, "edge {}-{}: {mean}", e.i, e.j);
    }
    for f in ["matrix.csv", "nodes.json", "trees.json", "overlay.png", "overlay.svg", "report.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn stage_timings_sum_to_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(&config(dir.path(), "out")).unwrap();
    let sum: f64 = out.report.timings.iter().map(|t| t.seconds).sum();
    assert!((sum - out.report.wall_seconds).abs() <= 0.05 * out.report.wall_seconds);
    let rep = report(&dir.path().join("out"));
    assert_eq!(rep["config"]["grid"]["n_theta"], 16);
    assert_eq!(rep["n_clusters"], 1);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(dir.path(), "a")).unwrap();
    run_pipeline(&config(dir.path(), "b")).unwrap();
    for f in ["trees.json", "nodes.json", "matrix.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn missing_input_is_an_ingest_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "track",
        "--image",
        dir.path().join("nope.png").to_str().unwrap(),
        "--landmarks",
        dir.path().join("nope.json").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--s-cluster",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[ingest]"));
}

#[test]
fn empty_landmarks_give_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = write_scene(dir.path());
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let o = dir.path().join("o");
    let out = run(&[
        "track",
        "--image",
        img.to_str().unwrap(),
        "--landmarks",
        empty.to_str().unwrap(),
        "--out",
        o.to_str().unwrap(),
        "--s-cluster",
        "auto",
        "--n-theta",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&o)["n_clusters"], 0);
    let trees: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("trees.json")).unwrap()).unwrap();
    assert_eq!(trees["clusters"].as_array().unwrap().len(), 0);
}

#[test]
fn config_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"output_dir": "o", "s_cluster": 1.0, "image": "a.png", "landmarks": "l.json", "colour": 1}"#).unwrap();
    let out = run(&["track", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[config]"));

    std::fs::write(&cfg, r#"{"output_dir": "o", "s_cluster": -1.0, "image": "a.png", "landmarks": "l.json"}"#).unwrap();
    assert_eq!(run(&["track", "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(run(&["track", "--bogus-flag"]).status.code(), Some(4));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lms) = write_scene(dir.path());
    let cfg = dir.path().join("c.json");
    let body = serde_json::json!({
        "image": img, "landmarks": lms, "output_dir": dir.path().join("from_file"),
        "s_cluster": 0.5, "grid": {"n_theta": 32}
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let o = dir.path().join("from_flag");
    let out = run(&["track", "--config", cfg.to_str().unwrap(), "--n-theta", "8", "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&o);
    assert_eq!(rep["config"]["grid"]["n_theta"], 8);
    assert_eq!(rep["grid"]["n_theta"], 8);
    assert!(!dir.path().join("from_file").exists());
}

#[test]
fn crop_shifts_and_filters_landmarks() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), "out");
    cfg.crop = Some([5, 20, 45, 40]);
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.report.grid.width, 45);
    assert_eq!(out.report.grid.height, 40);
    // root endpoint (10, 40) and bifurcation (40, 40) survive the crop
    let xy: Vec<(f64, f64)> = out.nodes.iter().map(|n| (n.landmark.x, n.landmark.y)).collect();
    assert_eq!(xy, vec![(5.0, 20.0), (35.0, 20.0)]);
}

#[test]
fn heatmap_input_extracts_landmarks() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), "out");
    let truth: Vec<Landmark> = io::read_json(cfg.landmarks.take().unwrap()).unwrap();
    let rounded: Vec<Landmark> = truth.iter().map(|l| Landmark::new(l.x.round(), l.y.round(), l.class)).collect();
    let hm = heatmap_targets(&rounded, 80, 80, &DetectionParams::default()).unwrap();
    let path = dir.path().join("hm.tif");
    io::write_heatmap_tiff(&path, &hm).unwrap();
    cfg.heatmap = Some(path);
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.report.n_landmarks, 4);
    assert_eq!(out.trees.clusters.len(), 1);
}

#[test]
fn trajectory_input_runs() {
    let dir = tempfile::tempdir().unwrap();
    let tracks: Vec<Trajectory> = (0..3)
        .map(|id| Trajectory {
            track_id: id,
            points: (0..100)
                .map(|t| TrajectoryPoint {
                    x: 5.0 + 0.5 * t as f64,
                    y: 20.0 + id as f64 * 0.5,
                    vx: 1.0,
                    vy: 0.0,
                    t: t as f64,
                })
                .collect(),
        })
        .collect();
    let csv = dir.path().join("t.csv");
    io::write_trajectories(&csv, &tracks).unwrap();
    let lms = dir.path().join("l.json");
    io::write_json(
        &lms,
        &[
            Landmark::new(6.0, 20.0, vesseltree::types::LandmarkClass::Endpoint),
            Landmark::new(52.0, 20.0, vesseltree::types::LandmarkClass::Endpoint),
        ],
    )
    .unwrap();
    let mut cfg = PipelineConfig::new(dir.path().join("o"), SCluster::Value(0.5));
    cfg.trajectories = Some(csv);
    cfg.landmarks = Some(lms);
    cfg.grid.width = Some(60);
    cfg.grid.height = Some(40);
    cfg.grid.n_theta = 16;
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.report.n_clusters, 1);
    assert_eq!(out.trees.clusters[0].edges.len(), 1);
    assert!(out.trees.clusters[0].edges[0].polyline.iter().all(|q| (q[1] - 20.5).abs() <= 2.0));
}

#[test]
fn subcommands_compose_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = |f: &str| dir.path().join(f).to_str().unwrap().to_owned();
    let ok = |o: Output| {
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    ok(run(&["synth", "--out", &d("s"), "--width", "64", "--height", "64", "--trees", "1", "--depth", "1", "--seed", "2"]));
    for f in ["s/image.png", "s/landmarks.json", "s/centerlines.json", "s/heatmap.tif"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    ok(run(&["lift", "--image", &d("s/image.png"), "--out", &d("score.lft"), "--n-theta", "8"]));
    let score = io::read_lft1(d("score.lft")).unwrap();
    assert_eq!((score.spec().width, score.spec().height, score.spec().n_theta), (64, 64, 8));
    ok(run(&[
        "cost",
        "--score",
        &d("score.lft"),
        "--out",
        &d("cost.lft"),
        "--landmarks",
        &d("s/landmarks.json"),
        "--nodes",
        &d("nodes.json"),
        "--epsilon",
        "0.5",
    ]));
    let nodes: Vec<serde_json::Value> = io::read_json(d("nodes.json")).unwrap();
    assert_eq!(nodes.len(), 2);
    let o = ok(run(&[
        "oracle",
        "--cost",
        &d("cost.lft"),
        "--seed",
        "5,5,0",
        "--target",
        "20,25,0",
        "--target",
        "40,10,1.0",
        "--epsilon",
        "1",
        "--xi",
        "1",
        "--out",
        &d("maps/u"),
    ]));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for t in v["targets"].as_array().unwrap() {
        let (u, o) = (t["fast_marching"].as_f64().unwrap(), t["oracle"].as_f64().unwrap());
        assert!(u > 0.0 && o > 0.0 && u.is_finite() && o.is_finite());
    }
    let (map, _) = io::read_distance_map(d("maps/u_fm")).unwrap();
    assert_eq!(map.seed.landmark.x, 5.0);
    ok(run(&[
        "track",
        "--image",
        &d("s/image.png"),
        "--landmarks",
        &d("s/landmarks.json"),
        "--out",
        &d("t"),
        "--s-cluster",
        "auto",
        "--n-theta",
        "8",
    ]));
    ok(run(&[
        "render",
        "--image",
        &d("s/image.png"),
        "--trees",
        &d("t/trees.json"),
        "--landmarks",
        &d("s/landmarks.json"),
        "--out",
        &d("r/overlay.png"),
    ]));
    assert!(dir.path().join("r/overlay.svg").exists());
    let o = ok(run(&["eval", "--predicted", &d("s/landmarks.json"), "--truth", &d("s/landmarks.json")]));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["aggregate"]["f1"], 1.0);
}
