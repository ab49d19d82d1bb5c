//! Python bindings: quantile functions, distances, training and indexes.

use std::path::PathBuf;

use distsom_core as core;
use distsom_core::io::{
    load_table, write_artifacts, write_json, write_table, TableFormat, REPORT_FILE,
};
use distsom_core::pipeline::{run, RunConfig};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    match (&e, e.kind()) {
        (core::Error::Io { .. }, _) => PyOSError::new_err(e.to_string()),
        (_, core::ErrorKind::Runtime) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// A piecewise-linear quantile function.
#[pyclass(
    name = "QuantileFunction",
    module = "pydistsom",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyQuantile(core::QuantileFunction);

#[pymethods]
impl PyQuantile {
    #[new]
    fn new(probs: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        core::QuantileFunction::new(probs, values)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_histogram(breaks: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        let h = core::HistogramSpec::new(breaks, weights).map_err(to_py)?;
        Ok(Self(core::QuantileFunction::from_histogram(&h)))
    }

    #[staticmethod]
    fn from_samples(samples: Vec<f64>, bins: usize) -> PyResult<Self> {
        core::QuantileFunction::from_samples(&samples, bins)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn uniform(lo: f64, hi: f64) -> PyResult<Self> {
        core::QuantileFunction::uniform(lo, hi)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn dirac(c: f64) -> Self {
        Self(core::QuantileFunction::dirac(c))
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn __call__(&self, p: f64) -> f64 {
        self.0.eval(p)
    }

    fn __repr__(&self) -> String {
        format!(
            "QuantileFunction(probs={:?}, values={:?})",
            self.0.probs(),
            self.0.values()
        )
    }
}

/// Squared L2 Wasserstein distance.
#[pyfunction]
fn w2_squared(a: &PyQuantile, b: &PyQuantile) -> f64 {
    core::w2_squared(&a.0, &b.0)
}

/// `(mean, dispersion)` parts of the squared distance.
#[pyfunction]
fn decompose(a: &PyQuantile, b: &PyQuantile) -> (f64, f64) {
    let c = core::decompose(&a.0, &b.0);
    (c.mean, c.dispersion)
}

/// Objects by distributional variables.
#[pyclass(name = "Table", module = "pydistsom", frozen)]
struct PyTable(core::DistributionalTable);

#[pymethods]
impl PyTable {
    #[new]
    #[pyo3(signature = (objects, variables, rows, labels=None))]
    fn new(
        objects: Vec<String>,
        variables: Vec<String>,
        rows: Vec<Vec<PyRef<'_, PyQuantile>>>,
        labels: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let rows = rows
            .into_iter()
            .map(|r| r.iter().map(|q| q.0.clone()).collect())
            .collect();
        core::DistributionalTable::from_rows(objects, variables, rows, labels)
            .map(Self)
            .map_err(to_py)
    }

    /// Reads a JSON or CSV table, chosen by extension.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_table(&path, TableFormat::from_path(&path))
            .map(Self)
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_table(&path, &self.0).map_err(to_py)
    }

    #[getter]
    fn objects(&self) -> Vec<String> {
        self.0.objects().to_vec()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.0.variables().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<String>> {
        self.0.labels().map(<[String]>::to_vec)
    }

    fn cell(&self, i: usize, j: usize) -> PyResult<PyQuantile> {
        if i >= self.0.n_objects() || j >= self.0.n_variables() {
            return Err(PyValueError::new_err(format!(
                "cell ({i}, {j}) is out of range"
            )));
        }
        Ok(PyQuantile(self.0.cell(i, j).clone()))
    }

    fn __len__(&self) -> usize {
        self.0.n_objects()
    }
}

/// A trained map.
#[pyclass(name = "Map", module = "pydistsom", frozen)]
struct PyMap {
    map: core::TrainedMap,
    restarts: usize,
}

#[pymethods]
impl PyMap {
    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.map.assignment.0.clone()
    }

    #[getter]
    fn counts(&self) -> Vec<usize> {
        self.map.assignment.counts(self.map.grid.len())
    }

    #[getter]
    fn criterion(&self) -> f64 {
        self.map.criterion()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.map.converged
    }

    #[getter]
    fn restart(&self) -> usize {
        self.map.restart
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.map.grid.rows(), self.map.grid.cols())
    }

    /// Criterion after every epoch and final cycle.
    #[getter]
    fn history(&self) -> Vec<f64> {
        self.map.history.iter().map(|r| r.criterion).collect()
    }

    fn prototype(&self, m: usize, j: usize) -> PyResult<PyQuantile> {
        let p = &self.map.prototypes;
        if m >= p.neurons() || j >= p.variables() {
            return Err(PyValueError::new_err(format!(
                "prototype ({m}, {j}) is out of range"
            )));
        }
        Ok(PyQuantile(p.cell(m, j).clone()))
    }

    /// `(mean, dispersion)` weights per neuron and variable, or `None` for
    /// DBSOM.
    fn weights(&self) -> Option<Vec<Vec<(f64, f64)>>> {
        self.map.weights.as_ref().map(|w| {
            (0..w.neurons())
                .map(|m| {
                    (0..w.variables())
                        .map(|j| w.component_weights(m, j))
                        .collect()
                })
                .collect()
        })
    }

    /// Validity indexes as a dict; external ones need `labels`.
    #[pyo3(signature = (table, labels=None))]
    fn report<'py>(
        &self,
        py: Python<'py>,
        table: &PyTable,
        labels: Option<Vec<String>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let labels = labels.or_else(|| table.0.labels().map(<[String]>::to_vec));
        let r = core::evaluate_map(&table.0, &self.map, labels.as_deref()).map_err(to_py)?;
        json_to_py(py, &serde_json::to_string(&r).expect("serializable report"))
    }

    /// Writes map.json, prototypes.json, weights.json and report.json.
    fn save(&self, dir: PathBuf, table: &PyTable) -> PyResult<()> {
        write_artifacts(&dir, &self.map, &table.0, self.restarts).map_err(to_py)?;
        let r = core::evaluate_map(&table.0, &self.map, table.0.labels()).map_err(to_py)?;
        write_json(&dir.join(REPORT_FILE), &r).map_err(to_py)
    }
}

/// Trains a map with the best of `restarts` runs.
#[pyfunction]
#[pyo3(signature = (
    table, rows, cols, *, topology="planar", algorithm="DBSOM", scheme=None, restarts=20, seed=0,
    n_iter=50, t_max=None, t_min=None, standardize=false
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    table: &PyTable,
    rows: usize,
    cols: usize,
    topology: &str,
    algorithm: &str,
    scheme: Option<&str>,
    restarts: usize,
    seed: u64,
    n_iter: usize,
    t_max: Option<f64>,
    t_min: Option<f64>,
    standardize: bool,
) -> PyResult<PyMap> {
    let config = RunConfig {
        algorithm: algorithm.parse().map_err(to_py)?,
        scheme: scheme.map(str::parse).transpose().map_err(to_py)?,
        topology: topology.parse().map_err(to_py)?,
        rows: Some(rows),
        cols: Some(cols),
        restarts,
        seed,
        n_iter,
        t_max,
        t_min,
        standardize,
        ..RunConfig::default()
    };
    config.validate().map_err(to_py)?;
    let grid = config.grid_for(table.0.n_objects()).map_err(to_py)?;
    let map = py
        .detach(|| core::multi_restart(&table.0, &grid, &config.train_config(), restarts))
        .map_err(to_py)?;
    Ok(PyMap { map, restarts })
}

/// Runs a full training from a config dict with the `train` verb's keys;
/// returns the report.
#[pyfunction]
fn run_config<'py>(py: Python<'py>, config: &Bound<'py, PyDict>) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py
        .import("json")?
        .call_method1("dumps", (config,))?
        .extract()?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = py.detach(|| run(&cfg)).map_err(to_py)?;
    json_to_py(
        py,
        &serde_json::to_string(&out.report).expect("serializable report"),
    )
}

#[derive(FromPyObject, PartialEq, Eq, Hash)]
enum Label {
    Int(i64),
    Str(String),
}

#[pyfunction]
fn ari(classes: Vec<Label>, clusters: Vec<Label>) -> PyResult<f64> {
    core::ari(&classes, &clusters).map_err(to_py)
}

#[pyfunction]
fn nmi(classes: Vec<Label>, clusters: Vec<Label>) -> PyResult<f64> {
    core::nmi(&classes, &clusters).map_err(to_py)
}

#[pyfunction]
fn purity(classes: Vec<Label>, clusters: Vec<Label>) -> PyResult<f64> {
    core::purity(&classes, &clusters).map_err(to_py)
}

#[pymodule]
fn pydistsom(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantile>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyMap>()?;
    m.add_function(wrap_pyfunction!(w2_squared, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(purity, m)?)?;
    Ok(())
}
