//! Python bindings: scenarios in, waveforms and metrics out.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use mtdc_sim::config::{parse_scenario, to_toml, with_override};
use mtdc_sim::report::{comparison_markdown, write_outputs};
use mtdc_sim::scenario::{self, ScenarioConfig, SimulationResult};
use mtdc_sim::SimError;

create_exception!(mtdc_sim_py, SimulationError, PyException);

fn err(e: SimError) -> PyErr {
    SimulationError::new_err((e.kind(), e.to_string()))
}

/// Serde value to plain Python objects, through the json module.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value)
        .map_err(|e| SimulationError::new_err(("io", e.to_string())))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Scenario", module = "mtdc_sim_py", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    /// The default scenario, or one parsed from TOML text.
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => parse_scenario(t).map_err(err)?,
            None => ScenarioConfig::default(),
        };
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| {
            err(SimError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        })?;
        Self::new(Some(&text))
    }

    /// Copy with one dotted key replaced, e.g. `("fault.line", "2")`.
    fn with_value(&self, key: &str, value: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: with_override(&self.inner, key, value).map_err(err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        to_toml(&self.inner).map_err(err)
    }

    #[getter]
    fn breaker_design(&self) -> String {
        format!("{:?}", self.inner.breaker_design).to_lowercase()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    fn run(&self, py: Python<'_>) -> PyResult<PyRun> {
        let config = self.inner.clone();
        let inner = py.detach(move || scenario::run(&config)).map_err(err)?;
        Ok(PyRun { inner })
    }

    fn sweep(&self, py: Python<'_>, path: &str, values: Vec<f64>) -> PyResult<Vec<PyRun>> {
        let config = self.inner.clone();
        let path = path.to_owned();
        let runs = py
            .detach(move || scenario::sweep(&config, &path, &values))
            .map_err(err)?;
        Ok(runs.into_iter().map(|inner| PyRun { inner }).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(design={}, duration={})",
            self.breaker_design(),
            self.inner.duration
        )
    }
}

#[pyclass(name = "SimulationResult", module = "mtdc_sim_py")]
struct PyRun {
    inner: SimulationResult,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn probe_names(&self) -> Vec<String> {
        self.inner.probes.iter().map(|p| p.name.clone()).collect()
    }

    fn probe(&self, name: &str) -> Option<Vec<f64>> {
        self.inner.probe(name).map(<[f64]>::to_vec)
    }

    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.metrics)
    }

    #[getter]
    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.events)
    }

    #[getter]
    fn trips<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.trips)
    }

    #[getter]
    fn faulted_lines(&self) -> Vec<usize> {
        self.inner.faulted_lines.clone()
    }

    #[getter]
    fn first_trip(&self) -> Option<f64> {
        self.inner.first_trip()
    }

    #[getter]
    fn scenario(&self) -> PyScenario {
        PyScenario {
            inner: self.inner.config.clone(),
        }
    }

    /// Writes waveforms.csv, events.jsonl, summary.json and config.toml.
    fn write(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        write_outputs(&self.inner, &dir).map_err(err)
    }
}

/// Comparison of two runs as a dict, plus the rendered markdown table
/// under `"markdown"`.
#[pyfunction]
fn compare<'py>(py: Python<'py>, a: &PyRun, b: &PyRun) -> PyResult<Bound<'py, PyAny>> {
    let c = scenario::compare(&a.inner, &b.inner).map_err(err)?;
    let out = to_py(py, &c)?;
    out.cast::<PyDict>()?
        .set_item("markdown", comparison_markdown(&c))?;
    Ok(out)
}

#[pyfunction]
fn default_toml() -> PyResult<String> {
    to_toml(&ScenarioConfig::default()).map_err(err)
}

#[pymodule]
fn mtdc_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(default_toml, m)?)?;
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    Ok(())
}
