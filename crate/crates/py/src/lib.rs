//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists built from the engine's JSON forms.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use vif_core::physio::{decode_sample, simulate_to_vec, Scenario, StressParams};
use vif_core::runtime::{write_transcript, EngineEvent, PlayerInput, SessionConfig};
use vif_core::script::{lint_story, parse_script, serialize_story, Story};
use vif_core::session::{parse_inputs, Scene};

fn to_py(py: Python<'_>, value: &Value) -> PyResult<Py<PyAny>> {
    match value {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_py_any(py),
            (None, Some(i)) => i.into_py_any(py),
            _ => n.as_f64().unwrap_or(f64::NAN).into_py_any(py),
        },
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn ser_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &json)
}

fn events_to_py(py: Python<'_>, events: &[EngineEvent]) -> PyResult<Py<PyAny>> {
    ser_to_py(py, &events)
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load_story(source: &str) -> PyResult<Story> {
    parse_script(source).map(|p| p.story).map_err(|e| {
        let lines: Vec<String> = e.diagnostics().iter().map(|d| d.to_json_line()).collect();
        PyValueError::new_err(if lines.is_empty() { e.to_string() } else { lines.join("\n") })
    })
}

/// Parses a script and returns the story as nested dicts.
#[pyfunction]
fn parse(py: Python<'_>, source: &str) -> PyResult<Py<PyAny>> {
    ser_to_py(py, &load_story(source)?)
}

/// Parser and lint diagnostics, sorted by line. Never raises on bad input.
#[pyfunction]
fn lint(py: Python<'_>, source: &str) -> PyResult<Py<PyAny>> {
    let diags = match parse_script(source) {
        Ok(parsed) => {
            let mut d = parsed.diagnostics;
            d.extend(lint_story(&parsed.story));
            d.sort_by_key(|d| d.line);
            d
        }
        Err(e) => e.diagnostics().to_vec(),
    };
    ser_to_py(py, &diags)
}

/// Canonical markup for a script.
#[pyfunction]
fn serialize(source: &str) -> PyResult<String> {
    Ok(serialize_story(&load_story(source)?))
}

#[pyfunction]
fn normalize_section_id(raw: &str) -> PyResult<String> {
    vif_core::script::normalize_section_id(raw)
        .map(|id| id.to_string())
        .map_err(value_err)
}

/// Stress index with default parameters.
#[pyfunction]
fn stress_index(hr: f64, br: f64) -> f64 {
    vif_core::physio::stress_index(hr, br, &StressParams::default())
}

#[pyfunction]
fn angular_distance(a: f64, b: f64) -> f64 {
    vif_core::spatial::angular_distance(a, b)
}

/// Runs the sensor simulator; returns the samples as dicts.
#[pyfunction]
#[pyo3(signature = (scenario, seed=0))]
fn simulate(py: Python<'_>, scenario: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let scenario = Scenario::parse(scenario).map_err(value_err)?;
    ser_to_py(py, &simulate_to_vec(&scenario, seed))
}

/// Headless play; returns the JSON-lines transcript.
#[pyfunction]
#[pyo3(signature = (story, scenario="", inputs="", seed=0))]
fn run_headless(story: &str, scenario: &str, inputs: &str, seed: u64) -> PyResult<String> {
    let story = load_story(story)?;
    let scenario = Scenario::parse(scenario).map_err(value_err)?;
    let inputs = parse_inputs(inputs).map_err(value_err)?;
    let transcript = vif_core::session::run_headless(story, &scenario, &inputs, seed, SessionConfig::default())
        .map_err(value_err)?;
    Ok(write_transcript(&transcript))
}

/// A live story session driven step by step from Python.
#[pyclass(name = "Session")]
struct PySession {
    inner: vif_core::runtime::Session,
    start_events: Vec<EngineEvent>,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (source, dwell_ms=1000, half_fov=45.0, day_seconds=600.0, seed=0))]
    fn new(source: &str, dwell_ms: u64, half_fov: f64, day_seconds: f64, seed: u64) -> PyResult<Self> {
        let config = SessionConfig {
            dwell_threshold_ms: dwell_ms,
            half_fov,
            game_day_real_seconds: day_seconds,
            seed,
            ..SessionConfig::default()
        };
        let (inner, start_events) = vif_core::runtime::Session::start(load_story(source)?, config).map_err(value_err)?;
        Ok(Self { inner, start_events })
    }

    /// Events emitted when the session started.
    #[getter]
    fn start_events(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        events_to_py(py, &self.start_events)
    }

    #[getter]
    fn current_section(&self) -> String {
        self.inner.current_section().to_string()
    }

    #[getter]
    fn now(&self) -> u64 {
        self.inner.now()
    }

    fn tick(&mut self, py: Python<'_>, now: u64) -> PyResult<Py<PyAny>> {
        let events = self.inner.tick(now).map_err(value_err)?;
        events_to_py(py, &events)
    }

    fn yaw(&mut self, py: Python<'_>, deg: f64, now: u64) -> PyResult<Py<PyAny>> {
        let events = self.inner.on_player_input(&PlayerInput::Yaw { deg }, now).map_err(value_err)?;
        events_to_py(py, &events)
    }

    #[pyo3(signature = (span, now))]
    fn hover(&mut self, py: Python<'_>, span: Option<String>, now: u64) -> PyResult<Py<PyAny>> {
        let events = self.inner.on_player_input(&PlayerInput::Hover { span }, now).map_err(value_err)?;
        events_to_py(py, &events)
    }

    /// Feeds one sensor wire line.
    fn sample(&mut self, py: Python<'_>, line: &str, now: u64) -> PyResult<Py<PyAny>> {
        let sample = decode_sample(line).map_err(value_err)?;
        let events = self.inner.on_sample(&sample, now).map_err(value_err)?;
        events_to_py(py, &events)
    }

    fn scene(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        ser_to_py(py, &Scene::of(&self.inner, self.inner.now()))
    }

    fn __repr__(&self) -> String {
        format!("Session(section={:?}, t={})", self.inner.current_section().as_str(), self.inner.now())
    }
}

#[pymodule]
fn vif(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(lint, m)?)?;
    m.add_function(wrap_pyfunction!(serialize, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_section_id, m)?)?;
    m.add_function(wrap_pyfunction!(stress_index, m)?)?;
    m.add_function(wrap_pyfunction!(angular_distance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_headless, m)?)?;
    m.add_class::<PySession>()?;
    Ok(())
}
