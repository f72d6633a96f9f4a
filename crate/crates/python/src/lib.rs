//! Python module `qualia`. Structured values cross the boundary as Python
//! objects built from JSON; specs travel as canonical JSON strings.

use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use qualia_core::agents::{run_simulated_session, vision, AgentPolicy};
use qualia_core::inference::{self, TestConfig};
use qualia_core::items::{self, InstanceRegistry, QuestionItem};
use qualia_core::session::{EventSink, FileSink, NullSink, Outcome, Session as CoreSession, Verdict};
use qualia_core::stimulus::{self, BiasModel, Difficulty, IllusionKind, IllusionSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_spec(spec_json: &str) -> PyResult<IllusionSpec> {
    IllusionSpec::from_json(spec_json).map_err(value_err)
}

fn parse_config(config_json: Option<&str>) -> PyResult<TestConfig> {
    let cfg: TestConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => TestConfig::default(),
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// Names of the illusion kinds.
#[pyfunction]
fn kinds() -> Vec<&'static str> {
    IllusionKind::ALL.iter().map(|k| k.as_str()).collect()
}

/// Canonical JSON of a sampled instance.
#[pyfunction]
#[pyo3(signature = (kind, seed, difficulty = "standard", catch = false))]
fn sample_spec(kind: &str, seed: u64, difficulty: &str, catch: bool) -> PyResult<String> {
    let kind: IllusionKind = kind.parse().map_err(value_err)?;
    let bias = BiasModel::default();
    let spec = if catch {
        stimulus::sample_catch_spec(kind, seed, &bias)
    } else {
        let d: Difficulty = difficulty.parse().map_err(value_err)?;
        stimulus::sample_spec(kind, seed, d, &bias)
    }
    .map_err(value_err)?;
    Ok(spec.canonical_json())
}

/// Hex SHA-256 of the canonical form.
#[pyfunction]
fn spec_hash(spec_json: &str) -> PyResult<String> {
    Ok(parse_spec(spec_json)?.canonical_hash().to_hex())
}

#[pyfunction]
fn render_png<'py>(py: Python<'py>, spec_json: &str) -> PyResult<Bound<'py, PyBytes>> {
    let spec = parse_spec(spec_json)?;
    let png = stimulus::render(&spec).and_then(|r| r.to_png()).map_err(value_err)?;
    Ok(PyBytes::new(py, &png))
}

#[pyfunction]
fn ground_truth(py: Python<'_>, spec_json: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &stimulus::ground_truth(&parse_spec(spec_json)?))
}

/// Full item, answer key included.
#[pyfunction]
#[pyo3(signature = (spec_json, shuffle_seed = 0))]
fn build_item(py: Python<'_>, spec_json: &str, shuffle_seed: u64) -> PyResult<Py<PyAny>> {
    let item = items::build_item(&parse_spec(spec_json)?, &BiasModel::default(), shuffle_seed).map_err(value_err)?;
    to_py(py, &item)
}

/// P(at least `observed` matches) for independent guesses.
#[pyfunction]
fn guess_pvalue(match_probs: Vec<f64>, observed: usize) -> PyResult<f64> {
    inference::guess_pvalue(&match_probs, observed).map_err(value_err)
}

/// Likelihood of an answer under (guess, veridical, perceiver).
#[pyfunction]
fn likelihoods(k: usize, veridical_idx: usize, illusion_idx: usize, answer: usize, epsilon: f64) -> PyResult<(f64, f64, f64)> {
    let l = inference::likelihoods(k, veridical_idx, illusion_idx, answer, epsilon).map_err(value_err)?;
    Ok((l[0], l[1], l[2]))
}

/// Index of the choice an image-reading perceiver would pick.
#[pyfunction]
fn perceive(prompt: &str, choices: Vec<String>, png: &[u8]) -> PyResult<usize> {
    vision::perceive(prompt, &choices, png, &BiasModel::default()).map_err(value_err)
}

/// Number of golden renders whose digest no longer matches.
#[pyfunction]
fn verify_golden() -> PyResult<usize> {
    let entries = stimulus::load_corpus(stimulus::GOLDEN_CORPUS).map_err(runtime_err)?;
    Ok(stimulus::verify_corpus(&entries).len())
}

/// Verdict counts for `runs` sessions of a built-in policy.
#[pyfunction]
#[pyo3(signature = (policy, runs = 100, epsilon = 0.05, config_json = None))]
fn simulate(py: Python<'_>, policy: &str, runs: u32, epsilon: f64, config_json: Option<&str>) -> PyResult<Py<PyAny>> {
    let cfg = parse_config(config_json)?;
    let mut counts = std::collections::BTreeMap::<String, u32>::new();
    for r in 0..runs {
        let seed = u64::from(r);
        let mut p = match policy {
            "perceiver" => AgentPolicy::PerceiverSimulant { epsilon, seed },
            "veridical" => AgentPolicy::VeridicalSimulant { epsilon, seed },
            "guesser" => AgentPolicy::RandomGuesser { seed },
            "vision" => AgentPolicy::ImagePerceiver { bias: cfg.bias },
            other => return Err(value_err(format!("unknown policy {other:?}"))),
        };
        let v = py
            .detach(|| run_simulated_session(&mut p, &format!("sim-{r}"), cfg.clone()))
            .map_err(runtime_err)?;
        *counts.entry(v.label.to_string()).or_default() += 1;
    }
    to_py(py, &counts)
}

fn verdict_view(py: Python<'_>, v: &Verdict) -> PyResult<Py<PyAny>> {
    to_py(py, v)
}

fn agent_view(py: Python<'_>, item: &QuestionItem) -> PyResult<Py<PyAny>> {
    to_py(
        py,
        &serde_json::json!({
            "item_id": item.item_id,
            "prompt": item.prompt,
            "choices": item.choice_texts(),
        }),
    )
}

/// A test session. `next_item` returns only what the subject may see;
/// `snapshot` is the operator view with the answer key.
#[pyclass(module = "qualia")]
struct Session {
    inner: Mutex<CoreSession>,
}

impl Session {
    fn with<T>(&self, f: impl FnOnce(&mut CoreSession) -> T) -> T {
        f(&mut self.inner.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

fn sink_for(log_path: Option<&str>) -> PyResult<Box<dyn EventSink>> {
    Ok(match log_path {
        Some(p) => Box::new(FileSink::open(p).map_err(runtime_err)?),
        None => Box::new(NullSink),
    })
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (subject_id, config_json = None, log_path = None))]
    fn new(subject_id: &str, config_json: Option<&str>, log_path: Option<&str>) -> PyResult<Self> {
        let cfg = parse_config(config_json)?;
        let registry = Arc::new(InstanceRegistry::in_memory(false));
        let s = CoreSession::create(subject_id, cfg, registry, sink_for(log_path)?).map_err(runtime_err)?;
        Ok(Session { inner: Mutex::new(s) })
    }

    /// Rebuilds a session from its log; later events are appended to it.
    #[staticmethod]
    fn replay(log_path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(log_path).map_err(runtime_err)?;
        let registry = Arc::new(InstanceRegistry::in_memory(false));
        let s = CoreSession::replay(file, registry, sink_for(Some(log_path))?).map_err(runtime_err)?;
        Ok(Session { inner: Mutex::new(s) })
    }

    #[getter]
    fn session_id(&self) -> String {
        self.with(|s| s.session_id().to_string())
    }

    #[getter]
    fn state(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let state = self.with(|s| s.state());
        to_py(py, &state)
    }

    /// (guess, veridical, perceiver)
    #[getter]
    fn posterior(&self) -> (f64, f64, f64) {
        let p = self.with(|s| s.posterior().probs);
        (p[0], p[1], p[2])
    }

    #[getter]
    fn verdict(&self, py: Python<'_>) -> PyResult<Option<Py<PyAny>>> {
        match self.with(|s| s.verdict().cloned()) {
            Some(v) => Ok(Some(verdict_view(py, &v)?)),
            None => Ok(None),
        }
    }

    /// `(item, png_bytes)` for the next question.
    fn next_item<'py>(&self, py: Python<'py>) -> PyResult<(Py<PyAny>, Bound<'py, PyBytes>)> {
        let (item, png) = self.with(|s| s.next_item()).map_err(runtime_err)?;
        Ok((agent_view(py, &item)?, PyBytes::new(py, &png)))
    }

    /// Returns the verdict when the session closes, otherwise None.
    #[pyo3(signature = (item_id, choice, latency_ms = 0))]
    fn submit_answer(&self, py: Python<'_>, item_id: &str, choice: Option<usize>, latency_ms: u64) -> PyResult<Option<Py<PyAny>>> {
        match self.with(|s| s.submit_answer(item_id, choice, latency_ms)).map_err(value_err)? {
            Outcome::Continue => Ok(None),
            Outcome::Verdict(v) => Ok(Some(verdict_view(py, &v)?)),
        }
    }

    fn snapshot(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let snap = self.with(|s| s.snapshot());
        to_py(py, &snap)
    }

    fn __repr__(&self) -> String {
        self.with(|s| format!("Session(id={:?}, subject={:?}, state={:?})", s.session_id(), s.subject_id(), s.state()))
    }
}

#[pymodule]
fn qualia(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(kinds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_spec, m)?)?;
    m.add_function(wrap_pyfunction!(spec_hash, m)?)?;
    m.add_function(wrap_pyfunction!(render_png, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(build_item, m)?)?;
    m.add_function(wrap_pyfunction!(guess_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(likelihoods, m)?)?;
    m.add_function(wrap_pyfunction!(perceive, m)?)?;
    m.add_function(wrap_pyfunction!(verify_golden, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<Session>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_spec_round_trips_through_hash() {
        let spec = sample_spec("ebbinghaus", 4, "standard", false).unwrap();
        assert_eq!(spec_hash(&spec).unwrap(), IllusionSpec::from_json(&spec).unwrap().canonical_hash().to_hex());
        assert!(sample_spec("nonsense", 4, "standard", false).is_err());
        assert!(sample_spec("ebbinghaus", 4, "impossible", false).is_err());
    }

    #[test]
    fn module_functions_from_python() {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "qualia").unwrap();
            qualia(&m).unwrap();
            let p: f64 = m.getattr("guess_pvalue").unwrap().call1((vec![0.25; 10], 10)).unwrap().extract().unwrap();
            assert!((p - 0.25f64.powi(10)).abs() < 1e-18);

            let session = Bound::new(py, Session::new("py", None, None).unwrap()).unwrap();
            let (item, png): (Bound<PyAny>, Vec<u8>) =
                session.call_method0("next_item").unwrap().extract().unwrap();
            assert_eq!(&png[1..4], b"PNG");
            assert!(item.get_item("veridical_idx").is_err());
            let id: String = item.get_item("item_id").unwrap().extract().unwrap();
            session.call_method1("submit_answer", (id, 0usize)).unwrap();
        });
    }
}
