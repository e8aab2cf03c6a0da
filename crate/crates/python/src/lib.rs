//! Python bindings. Images are nested lists (rows of pixels, `[y][x]`),
//! lifted fields are [`PyLiftedField`] objects with a flat x-major buffer, and
//! parameter structs travel as plain dicts with the same keys as the JSON
//! configs.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use vesseltree::eikonal::{self, BacktrackParams, DistanceMap};
use vesseltree::graph::{self, DistanceMatrix};
use vesseltree::grid::UNREACHED;
use vesseltree::landmarks::{self, DetectionParams, Heatmap};
use vesseltree::lift::{self, FrangiParams, LiftKernelParams, Trajectory};
use vesseltree::metric::{self, CostField};
use vesseltree::pipeline::{self, MetricConfig, PipelineConfig};
use vesseltree::raster::Raster;
use vesseltree::synth::{self, SyntheticSpec};
use vesseltree::types::{Landmark, LiftedLandmark, MetricParams};
use vesseltree::{Error, GridSpec, LiftedField};

fn to_pyerr(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config(_) | Error::Domain(_) | Error::Parse(_) | Error::EmptyInput(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for vesseltree::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_pyerr)
    }
}

/// Python object -> serde value, by way of the `json` module.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn from_py_or_default<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        Some(o) if !o.is_none() => from_py(o),
        _ => Ok(T::default()),
    }
}

fn to_py<T: Serialize + ?Sized>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn raster_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Raster> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("image rows differ in length"));
    }
    Raster::from_vec(width, height, rows.into_iter().flatten().collect()).py_err()
}

fn raster_to_rows(r: &Raster) -> Vec<Vec<f64>> {
    r.data.chunks(r.width.max(1)).map(<[f64]>::to_vec).collect()
}

fn metric_for(spec: &GridSpec, metric: Option<&Bound<'_, PyAny>>) -> PyResult<MetricParams> {
    from_py_or_default::<MetricConfig>(metric)?.resolve(spec).py_err()
}

fn point(p: (f64, f64, f64)) -> LiftedLandmark {
    LiftedLandmark::at(p.0, p.1, p.2)
}

/// Distance field with unreached nodes mapped to `inf`.
fn distances_field(map: DistanceMap) -> PyLiftedField {
    PyLiftedField(map.field.map(|v| if v >= UNREACHED { f64::INFINITY } else { v }))
}

#[pyclass(name = "GridSpec", module = "vesseltree", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct PyGridSpec(GridSpec);

#[pymethods]
impl PyGridSpec {
    #[new]
    #[pyo3(signature = (width, height, n_theta, spacing = 1.0))]
    fn new(width: usize, height: usize, n_theta: usize, spacing: f64) -> PyResult<Self> {
        GridSpec::with_spacing(width, height, n_theta, spacing).py_err().map(PyGridSpec)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    #[getter]
    fn n_theta(&self) -> usize {
        self.0.n_theta
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing
    }

    fn theta(&self, k: usize) -> f64 {
        self.0.theta(k)
    }

    fn nearest_node(&self, x: f64, y: f64, theta: f64) -> (usize, usize, usize) {
        self.0.nearest_node(x, y, theta)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let s = &self.0;
        format!("GridSpec(width={}, height={}, n_theta={}, spacing={})", s.width, s.height, s.n_theta, s.spacing)
    }
}

/// Scalar field on the lifted grid, stored x-major: `(i * height + j) * n_theta + k`.
#[pyclass(name = "LiftedField", module = "vesseltree", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyLiftedField(LiftedField);

#[pymethods]
impl PyLiftedField {
    #[new]
    fn new(spec: &PyGridSpec, values: Vec<f64>) -> PyResult<Self> {
        LiftedField::from_values(spec.0, values).py_err().map(PyLiftedField)
    }

    #[staticmethod]
    #[pyo3(signature = (spec, value = 0.0))]
    fn filled(spec: &PyGridSpec, value: f64) -> Self {
        PyLiftedField(LiftedField::filled(spec.0, value))
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        vesseltree::io::read_lft1(path).py_err().map(PyLiftedField)
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        vesseltree::io::write_lft1(path, &self.0).py_err()
    }

    #[getter]
    fn spec(&self) -> PyGridSpec {
        PyGridSpec(*self.0.spec())
    }

    /// `(width, height, n_theta)`, matching the flat buffer order.
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let s = self.0.spec();
        (s.width, s.height, s.n_theta)
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn get(&self, i: usize, j: usize, k: usize) -> PyResult<f64> {
        let s = self.0.spec();
        if i >= s.width || j >= s.height || k >= s.n_theta {
            return Err(pyo3::exceptions::PyIndexError::new_err("grid index out of range"));
        }
        Ok(self.0.get(i, j, k))
    }

    /// Trilinear interpolation, periodic in θ.
    fn sample(&self, x: f64, y: f64, theta: f64) -> PyResult<f64> {
        self.0.sample(x, y, theta).py_err()
    }

    fn min_max(&self) -> (f64, f64) {
        self.0.min_max()
    }

    fn __repr__(&self) -> String {
        let (w, h, n) = self.shape();
        format!("LiftedField(shape=({w}, {h}, {n}))")
    }
}

#[pyfunction]
fn angular_distance(a: f64, b: f64) -> f64 {
    vesseltree::angular_distance(a, b)
}

/// Returns `(score, degenerate)`.
#[pyfunction]
#[pyo3(signature = (image, spec, params = None))]
fn lift_image(
    py: Python<'_>,
    image: Vec<Vec<f64>>,
    spec: &PyGridSpec,
    params: Option<&Bound<'_, PyAny>>,
) -> PyResult<(PyLiftedField, bool)> {
    let image = raster_from_rows(image)?;
    let params: LiftKernelParams = from_py_or_default(params)?;
    let spec = spec.0;
    let n = py.detach(|| lift::lift_image(&image, &spec, &params)).py_err()?;
    Ok((PyLiftedField(n.field), n.degenerate))
}

#[pyfunction]
#[pyo3(signature = (image, params = None))]
fn frangi_vesselness(py: Python<'_>, image: Vec<Vec<f64>>, params: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<Vec<f64>>> {
    let image = raster_from_rows(image)?;
    let params: FrangiParams = from_py_or_default(params)?;
    let out = py.detach(|| lift::frangi_vesselness(&image, &params)).py_err()?;
    Ok(raster_to_rows(&out))
}

/// `trajectories` is a list of `{"track_id": int, "points": [{"x", "y", "vx", "vy", "t"}, ...]}`.
#[pyfunction]
#[pyo3(signature = (trajectories, spec, smoothing = 1.5))]
fn build_ulm_score(
    py: Python<'_>,
    trajectories: &Bound<'_, PyAny>,
    spec: &PyGridSpec,
    smoothing: f64,
) -> PyResult<PyLiftedField> {
    let tracks: Vec<Trajectory> = from_py(trajectories)?;
    let spec = spec.0;
    py.detach(|| lift::build_ulm_score(&tracks, &spec, smoothing)).py_err().map(PyLiftedField)
}

/// `C = 1 / (1 + λW²)`.
#[pyfunction]
#[pyo3(signature = (score, metric = None))]
fn cost_from_score(score: &PyLiftedField, metric: Option<&Bound<'_, PyAny>>) -> PyResult<PyLiftedField> {
    let params = metric_for(score.0.spec(), metric)?;
    Ok(PyLiftedField(metric::cost_from_score(&score.0, &params).into_field()))
}

fn cost_field(cost: &PyLiftedField) -> PyResult<CostField> {
    CostField::new(cost.0.clone()).py_err()
}

/// Fast-marching distance from `seed = (x, y, theta)`; unreached nodes are `inf`.
#[pyfunction]
#[pyo3(signature = (cost, seed, metric = None))]
fn solve_distance(
    py: Python<'_>,
    cost: &PyLiftedField,
    seed: (f64, f64, f64),
    metric: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyLiftedField> {
    let params = metric_for(cost.0.spec(), metric)?;
    let cost = cost_field(cost)?;
    let map = py.detach(|| eikonal::solve_distance(&cost, &params, &point(seed))).py_err()?;
    Ok(distances_field(map))
}

/// Dijkstra reference solution on the graph of nodes within `radius` voxels.
#[pyfunction]
#[pyo3(signature = (cost, seed, metric = None, radius = 3.0))]
fn dijkstra_oracle(
    py: Python<'_>,
    cost: &PyLiftedField,
    seed: (f64, f64, f64),
    metric: Option<&Bound<'_, PyAny>>,
    radius: f64,
) -> PyResult<PyLiftedField> {
    let params = metric_for(cost.0.spec(), metric)?;
    let cost = cost_field(cost)?;
    let map = py.detach(|| eikonal::dijkstra_oracle(&cost, &params, &point(seed), radius)).py_err()?;
    Ok(distances_field(map))
}

/// Minimal path from `source` to `target`; returns `{"points", "length", "distance"}`
/// with points ordered target to source.
#[pyfunction]
#[pyo3(signature = (cost, source, target, metric = None, backtrack = None))]
fn geodesic(
    py: Python<'_>,
    cost: &PyLiftedField,
    source: (f64, f64, f64),
    target: (f64, f64, f64),
    metric: Option<&Bound<'_, PyAny>>,
    backtrack: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let params = metric_for(cost.0.spec(), metric)?;
    let opts: BacktrackParams = from_py_or_default(backtrack)?;
    let cost = cost_field(cost)?;
    let (src, dst) = (point(source), point(target));
    let (path, distance) = py
        .detach(|| -> vesseltree::Result<_> {
            let fm = eikonal::FastMarching::new(&cost, &params)?;
            let map = fm.solve_until(&src, &[dst])?;
            let distance = map.at(&dst).unwrap_or(f64::INFINITY);
            Ok((eikonal::backtrack_geodesic(&map, &cost, &params, &dst, &opts)?, distance))
        })
        .py_err()?;
    let out = PyDict::new(py);
    out.set_item("points", path.points)?;
    out.set_item("length", path.length)?;
    out.set_item("distance", distance)?;
    Ok(out.into_any().unbind())
}

/// Returns `(symmetrized, raw)` matrices; row `i` of `raw` is the solve seeded at node `i`.
#[pyfunction]
#[pyo3(signature = (cost, nodes, metric = None))]
fn pairwise_distances(
    py: Python<'_>,
    cost: &PyLiftedField,
    nodes: Vec<(f64, f64, f64)>,
    metric: Option<&Bound<'_, PyAny>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let params = metric_for(cost.0.spec(), metric)?;
    let cost = cost_field(cost)?;
    let nodes: Vec<LiftedLandmark> = nodes.into_iter().map(point).collect();
    let m = py.detach(|| graph::pairwise_distances(&cost, &params, &nodes)).py_err()?;
    let n = m.len();
    let sym = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    let raw = (0..n).map(|i| (0..n).map(|j| m.raw(i, j)).collect()).collect();
    Ok((sym, raw))
}

/// Single-linkage labels for the cut at `s_cluster`; ids ordered by smallest member.
#[pyfunction]
fn cluster_landmarks(matrix: Vec<Vec<f64>>, s_cluster: f64) -> PyResult<Vec<usize>> {
    let m = DistanceMatrix::from_rows(matrix).py_err()?;
    Ok(graph::cluster_landmarks(&m, s_cluster).py_err()?.labels)
}

/// Kruskal tree as `(i, j, weight)` triples over `members` (default: all nodes).
#[pyfunction]
#[pyo3(signature = (matrix, members = None))]
fn minimal_spanning_tree(matrix: Vec<Vec<f64>>, members: Option<Vec<usize>>) -> PyResult<Vec<(usize, usize, f64)>> {
    let m = DistanceMatrix::from_rows(matrix).py_err()?;
    let members = members.unwrap_or_else(|| (0..m.len()).collect());
    if members.iter().any(|&i| i >= m.len()) {
        return Err(PyValueError::new_err("member index out of range"));
    }
    let edges = graph::minimal_spanning_tree(&m, &members).py_err()?;
    Ok(edges.into_iter().map(|e| (e.i, e.j, e.weight)).collect())
}

/// Four channels (endpoint, bifurcation, crossing, relaxed) as images.
#[pyfunction]
#[pyo3(signature = (landmarks, width, height, params = None))]
fn heatmap_targets(
    landmarks: &Bound<'_, PyAny>,
    width: usize,
    height: usize,
    params: Option<&Bound<'_, PyAny>>,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let lms: Vec<Landmark> = from_py(landmarks)?;
    let params: DetectionParams = from_py_or_default(params)?;
    let hm = landmarks::heatmap_targets(&lms, width, height, &params).py_err()?;
    Ok(hm.channels.iter().map(raster_to_rows).collect())
}

#[pyfunction]
#[pyo3(signature = (channels, params = None))]
fn extract_landmarks(py: Python<'_>, channels: Vec<Vec<Vec<f64>>>, params: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let params: DetectionParams = from_py_or_default(params)?;
    let rasters = channels.into_iter().map(raster_from_rows).collect::<PyResult<Vec<_>>>()?;
    let channels: [Raster; 4] = rasters
        .try_into()
        .map_err(|_| PyValueError::new_err("heatmap needs exactly 4 channels"))?;
    let hm = Heatmap { channels };
    hm.validate().py_err()?;
    let lms = landmarks::extract_landmarks(&hm, &params).py_err()?;
    to_py(py, &lms)
}

/// Per-class, aggregate and class-agnostic precision/recall/F1.
#[pyfunction]
#[pyo3(signature = (predicted, truth, params = None))]
fn match_and_score(
    py: Python<'_>,
    predicted: &Bound<'_, PyAny>,
    truth: &Bound<'_, PyAny>,
    params: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let pred: Vec<Landmark> = from_py(predicted)?;
    let truth: Vec<Landmark> = from_py(truth)?;
    let params: DetectionParams = from_py_or_default(params)?;
    params.validate().py_err()?;
    to_py(py, &landmarks::match_and_score(&pred, &truth, &params))
}

/// Synthetic vessel scene: `{"image", "landmarks", "centerlines", "trees"}`.
#[pyfunction]
#[pyo3(signature = (spec = None))]
fn synth_generate(py: Python<'_>, spec: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let spec: SyntheticSpec = from_py_or_default(spec)?;
    let scene = py.detach(|| synth::synth_generate(&spec)).py_err()?;
    let out = PyDict::new(py);
    out.set_item("image", raster_to_rows(&scene.image))?;
    out.set_item("landmarks", to_py(py, &scene.landmarks)?)?;
    out.set_item("centerlines", to_py(py, &scene.centerlines)?)?;
    out.set_item("trees", to_py(py, &scene.trees)?)?;
    Ok(out.into_any().unbind())
}

/// Runs the full tracking pipeline; `config` is a dict or JSON string with the
/// same schema as the `track --config` file. Returns the run report.
#[pyfunction]
fn run_pipeline(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let cfg: PipelineConfig = match config.extract::<String>() {
        Ok(text) => PipelineConfig::from_json(&text).py_err()?,
        Err(_) => from_py(config)?,
    };
    let outcome = py.detach(|| pipeline::run_pipeline(&cfg)).map_err(|e| match e.source {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config(_) | Error::Parse(_) | Error::Domain(_) | Error::EmptyInput(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    })?;
    to_py(py, &outcome.report)
}

#[pymodule]
#[pyo3(name = "vesseltree")]
pub fn vesseltree_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyLiftedField>()?;
    m.add_function(wrap_pyfunction!(angular_distance, m)?)?;
    m.add_function(wrap_pyfunction!(lift_image, m)?)?;
    m.add_function(wrap_pyfunction!(frangi_vesselness, m)?)?;
    m.add_function(wrap_pyfunction!(build_ulm_score, m)?)?;
    m.add_function(wrap_pyfunction!(cost_from_score, m)?)?;
    m.add_function(wrap_pyfunction!(solve_distance, m)?)?;
    m.add_function(wrap_pyfunction!(dijkstra_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_distances, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_landmarks, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_spanning_tree, m)?)?;
    m.add_function(wrap_pyfunction!(heatmap_targets, m)?)?;
    m.add_function(wrap_pyfunction!(extract_landmarks, m)?)?;
    m.add_function(wrap_pyfunction!(match_and_score, m)?)?;
    m.add_function(wrap_pyfunction!(synth_generate, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
