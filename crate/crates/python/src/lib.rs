//! Python bindings: parse, generate and replay traces, and validate the
//! bundled syscall graphs.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use tracecheck::graphs::{bounded_cases, bundled_catalog, to_dot, validate_graph as validate};
use tracecheck::mock::{generate_trace, SimConfig};
use tracecheck::policy::universe::Bounds;
use tracecheck::replay::{journal_to_jsonl, replay_trace, Status};
use tracecheck::trace;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

/// A parsed syscall trace.
#[pyclass(module = "tracecheck_py")]
struct Trace {
    inner: trace::Trace,
}

#[pymethods]
impl Trace {
    /// Parses JSON Lines text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        trace::parse_trace(text)
            .map(|inner| Trace { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        trace::read_trace(path)
            .map(|inner| Trace { inner })
            .map_err(value_error)
    }

    fn to_jsonl(&self) -> String {
        trace::serialize_trace(&self.inner)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        trace::write_trace(path, &self.inner).map_err(value_error)
    }

    /// Recorded calls as dictionaries.
    fn calls<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        self.inner
            .calls
            .iter()
            .map(|c| json_to_py(py, &serde_json::to_string(c).map_err(value_error)?))
            .collect()
    }

    fn has_final_snapshot(&self) -> bool {
        self.inner.final_snapshot.is_some()
    }

    fn replay(&self) -> PyResult<ReplayResult> {
        replay_trace(&self.inner, &bundled_catalog())
            .map(|r| ReplayResult { inner: r })
            .map_err(value_error)
    }

    fn __len__(&self) -> usize {
        self.inner.calls.len()
    }

    fn __repr__(&self) -> String {
        format!("Trace({} calls)", self.inner.calls.len())
    }
}

/// Outcome of replaying a trace against the model.
#[pyclass(module = "tracecheck_py")]
struct ReplayResult {
    inner: tracecheck::replay::ReplayResult,
}

#[pymethods]
impl ReplayResult {
    /// `"Success"` or `"Failure"`.
    #[getter]
    fn status(&self) -> &'static str {
        match self.inner.status {
            Status::Success => "Success",
            Status::Failure => "Failure",
        }
    }

    #[getter]
    fn calls_processed(&self) -> u64 {
        self.inner.calls_processed
    }

    /// Highest journal severity, or `None` for an empty journal.
    #[getter]
    fn max_severity(&self) -> Option<String> {
        self.inner.max_severity().map(|s| format!("{s:?}").to_uppercase())
    }

    fn journal<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        journal_to_jsonl(&self.inner.journal)
            .lines()
            .map(|l| json_to_py(py, l))
            .collect()
    }

    fn coverage<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.coverage.to_json())
    }

    /// Fraction of guard conjuncts seen both holding and failing.
    fn conjunct_coverage(&self) -> f64 {
        self.inner.coverage.conjunct_fraction()
    }

    fn __repr__(&self) -> String {
        format!(
            "ReplayResult(status={}, calls_processed={}, journal={} entries)",
            self.status(),
            self.inner.calls_processed,
            self.inner.journal.len()
        )
    }
}

/// Runs the simulated kernel with a JSON config and returns its trace.
#[pyfunction]
fn generate(config_json: &str) -> PyResult<Trace> {
    let cfg = SimConfig::from_json(config_json).map_err(value_error)?;
    generate_trace(&cfg)
        .map(|g| Trace { inner: g.trace })
        .map_err(value_error)
}

#[pyfunction]
fn graph_names() -> Vec<&'static str> {
    bundled_catalog().names().collect()
}

#[pyfunction]
fn graph_dot(name: &str) -> PyResult<String> {
    let cat = bundled_catalog();
    let g = cat.get(name).map_err(|e| PyKeyError::new_err(e.to_string()))?;
    Ok(to_dot(g))
}

/// Defects of a bundled graph over the bounded universe; empty when valid.
#[pyfunction]
fn validate_graph(name: &str) -> PyResult<Vec<String>> {
    let cat = bundled_catalog();
    let g = cat.get(name).map_err(|e| PyKeyError::new_err(e.to_string()))?;
    let cases = bounded_cases(g, &Bounds::default());
    Ok(validate(g, cases.iter()).iter().map(|d| d.to_string()).collect())
}

#[pymodule]
fn tracecheck_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trace>()?;
    m.add_class::<ReplayResult>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(graph_names, m)?)?;
    m.add_function(wrap_pyfunction!(graph_dot, m)?)?;
    m.add_function(wrap_pyfunction!(validate_graph, m)?)?;
    Ok(())
}
