//! Python bindings: signals, warps, the UST reparameterization, distances,
//! SE(3) helpers, file IO and the verification battery.

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ust_core::io_formats;
use ust_core::lie_se3::{self, Se3, Twist};
use ust_core::matching::{self, Method};
use ust_core::metric_spaces::{random_warp, Signal, Space, Warp};
use ust_core::reparam::{self, UstOptions};
use ust_core::verify::{self, Theorem};
use ust_core::{demo, Error};

create_exception!(ust, UstError, PyValueError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => UstError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for ust_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Uniformly sampled signal on `[0, 1]`.
///
/// `points` is a list of floats (scalar signal) or a list of equal-length
/// rows. `space` is a tag such as `scalar`, `vector:3`, `matrix:2x2`, `se3`
/// or `se3^3`; rows are read as vectors when it is omitted. SE(3) rows hold
/// the 12-float layout `r00..r22, px, py, pz`.
#[pyclass(name = "Signal", module = "ust", frozen, from_py_object)]
#[derive(Clone)]
struct PySignal {
    inner: Signal,
}

#[pymethods]
impl PySignal {
    #[new]
    #[pyo3(signature = (points, space = None))]
    fn new(points: &Bound<'_, PyAny>, space: Option<&str>) -> PyResult<Self> {
        let space = space.map(str::parse::<Space>).transpose().py()?;
        let inner = if let Ok(values) = points.extract::<Vec<f64>>() {
            match space {
                None | Some(Space::Scalar) => Signal::from_scalars(values),
                Some(s) => Signal::new(s, values),
            }
        } else {
            let rows: Vec<Vec<f64>> = points.extract()?;
            let width = rows.first().map_or(0, Vec::len);
            let space = space.unwrap_or(if width == 1 { Space::Scalar } else { Space::Vector(width) });
            Signal::from_points(space, &rows)
        }
        .py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn space(&self) -> String {
        self.inner.space().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().map(<[f64]>::to_vec).collect()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.grid().times()
    }

    fn __repr__(&self) -> String {
        format!("Signal(space='{}', len={})", self.inner.space(), self.inner.len())
    }
}

/// Discretized increasing bijection of `[0, 1]` on a uniform grid.
#[pyclass(name = "Warp", module = "ust", frozen, from_py_object)]
#[derive(Clone)]
struct PyWarp {
    inner: Warp,
}

#[pymethods]
impl PyWarp {
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: Warp::new(values).py()?,
        })
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        let grid = ust_core::metric_spaces::TimeGrid::new(n).py()?;
        Ok(Self {
            inner: Warp::identity(grid),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed, roughness = 0.5))]
    fn random(n: usize, seed: u64, roughness: f64) -> PyResult<Self> {
        let grid = ust_core::metric_spaces::TimeGrid::new(n).py()?;
        Ok(Self {
            inner: random_warp(grid, seed, roughness).py()?,
        })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    fn deviation_from_identity(&self) -> f64 {
        self.inner.deviation_from_identity()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Warp(len={})", self.inner.len())
    }
}

#[pyclass(name = "UstResult", module = "ust", frozen, get_all)]
struct PyUstResult {
    warp: PyWarp,
    resampled: PySignal,
    total_length: f64,
}

/// Reparameterizes `signal` to constant speed.
#[pyfunction(name = "ust")]
#[pyo3(signature = (signal, samples = None, strict = false))]
fn reparameterize(signal: &PySignal, samples: Option<usize>, strict: bool) -> PyResult<PyUstResult> {
    let r = reparam::ust(&signal.inner, UstOptions { samples, strict }).py()?;
    Ok(PyUstResult {
        warp: PyWarp { inner: r.warp_star },
        resampled: PySignal { inner: r.resampled },
        total_length: r.total_length,
    })
}

#[pyfunction]
fn apply_warp(signal: &PySignal, warp: &PyWarp) -> PyResult<PySignal> {
    Ok(PySignal {
        inner: reparam::apply_warp(&signal.inner, &warp.inner).py()?,
    })
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().py()
}

/// Distance between two signals with `method` in `raw`, `ust`, `dtw`.
#[pyfunction]
#[pyo3(signature = (a, b, method = "ust"))]
fn distance(a: &PySignal, b: &PySignal, method: &str) -> PyResult<f64> {
    Ok(matching::compare(&a.inner, &b.inner, self::method(method)?).py()?.distance)
}

/// Nearest template as `(label, score)`.
#[pyfunction]
#[pyo3(signature = (query, templates, method = "ust"))]
fn classify(query: &PySignal, templates: Vec<(String, PySignal)>, method: &str) -> PyResult<(String, f64)> {
    let templates: Vec<(String, Signal)> = templates.into_iter().map(|(l, s)| (l, s.inner)).collect();
    let c = matching::classify_nearest(&query.inner, &templates, self::method(method)?).py()?;
    Ok((c.label, c.score))
}

fn pose(flat: [f64; 12]) -> Se3 {
    Se3::from_flat(&flat)
}

/// Twist `(wx, wy, wz, vx, vy, vz)` to a pose in the 12-float layout.
#[pyfunction]
fn exp_se3(twist: [f64; 6]) -> [f64; 12] {
    lie_se3::exp_se3(&Twist::from_array(twist)).to_flat()
}

#[pyfunction]
fn log_se3(pose_flat: [f64; 12]) -> PyResult<[f64; 6]> {
    Ok(lie_se3::log_se3(&pose(pose_flat)).py()?.to_array())
}

#[pyfunction]
fn metric_se3(a: [f64; 12], b: [f64; 12]) -> PyResult<f64> {
    lie_se3::metric_se3(&pose(a), &pose(b)).py()
}

/// Screw angle and axial translation `(theta, d)`.
#[pyfunction]
fn screw_invariants(pose_flat: [f64; 12]) -> (f64, f64) {
    let s = lie_se3::screw_invariants(&pose(pose_flat));
    (s.theta, s.d)
}

#[pyfunction]
#[pyo3(signature = (path, space = None))]
fn read_signal(path: &str, space: Option<&str>) -> PyResult<PySignal> {
    let space = space.map(str::parse::<Space>).transpose().py()?;
    Ok(PySignal {
        inner: io_formats::read_signal(path, space).py()?,
    })
}

#[pyfunction]
fn write_signal(signal: &PySignal, path: &str) -> PyResult<()> {
    io_formats::write_signal(&signal.inner, path).py()
}

/// Runs the optimality checks; returns one dict per check.
#[pyfunction(name = "verify")]
#[pyo3(signature = (theorems = None, grid = verify::DEFAULT_GRID))]
fn run_verify<'py>(py: Python<'py>, theorems: Option<Vec<String>>, grid: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let theorems = match theorems {
        Some(names) => names.iter().map(|s| s.parse::<Theorem>()).collect::<Result<Vec<_>, _>>().py()?,
        None => Theorem::ALL.to_vec(),
    };
    let report = py.detach(|| verify::run(&theorems, grid)).py()?;
    report
        .checks
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("theorem", c.theorem.to_string())?;
            d.set_item("name", &c.name)?;
            d.set_item("value", c.value)?;
            d.set_item("threshold", c.threshold)?;
            d.set_item("passed", c.passed)?;
            Ok(d)
        })
        .collect()
}

/// Accuracy `(ust, dtw)` of the synthetic action-recognition demo.
#[pyfunction]
#[pyo3(signature = (seed = 42))]
fn demo_accuracy(py: Python<'_>, seed: u64) -> PyResult<(f64, f64)> {
    let cfg = demo::DemoConfig {
        seed,
        ..Default::default()
    };
    let r = py.detach(|| demo::run(&cfg, matching::Quotient::Relative)).py()?;
    Ok((r.ust_accuracy, r.dtw_accuracy))
}

#[pymodule(name = "ust")]
fn ust_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("UstError", m.py().get_type::<UstError>())?;
    m.add_class::<PySignal>()?;
    m.add_class::<PyWarp>()?;
    m.add_class::<PyUstResult>()?;
    m.add_function(wrap_pyfunction!(reparameterize, m)?)?;
    m.add_function(wrap_pyfunction!(apply_warp, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(exp_se3, m)?)?;
    m.add_function(wrap_pyfunction!(log_se3, m)?)?;
    m.add_function(wrap_pyfunction!(metric_se3, m)?)?;
    m.add_function(wrap_pyfunction!(screw_invariants, m)?)?;
    m.add_function(wrap_pyfunction!(read_signal, m)?)?;
    m.add_function(wrap_pyfunction!(write_signal, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(demo_accuracy, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
