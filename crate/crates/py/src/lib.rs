//! Python bindings for the persuasion-game engine.
//!
//! Structured values (reports, transcripts, views) cross the boundary as
//! JSON and are decoded with Python's `json` module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use mindgames_core::agents::{OptimalPersuader, Persuader, PersuaderKind, RandomPersuader};
use mindgames_core::analytics;
use mindgames_core::bot::{BotState, Claim};
use mindgames_core::classify::ClassifierKind;
use mindgames_core::forge::{self, GenerateOptions};
use mindgames_core::llm::build_classifier;
use mindgames_core::model::{AttributeId, Cell, CellMask, Effect, GameInstance, Proposal, ValenceVector};
use mindgames_core::scenario;
use mindgames_core::session::{self, Condition, Role, SessionConfig};
use mindgames_core::transcript::to_jsonl;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

pub fn parse_condition(s: &str) -> Result<Condition, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown condition {s:?}"))
}

pub fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown classifier {s:?}"))
}

pub fn parse_cell(proposal: &str, attribute: usize) -> Result<Cell, String> {
    let p = Proposal::from_label(proposal).map_err(|e| e.to_string())?;
    let a = AttributeId::new(attribute).map_err(|e| e.to_string())?;
    Ok(Cell::new(p, a))
}

pub fn mask_cells(mask: CellMask) -> Vec<(String, usize)> {
    mask.cells()
        .map(|c| (c.proposal.label().to_string(), c.attribute.index()))
        .collect()
}

/// A generated game.
#[pyclass(name = "Instance", module = "mindgames", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyInstance {
    inner: GameInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyInstance {
            inner: serde_json::from_str(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("instances serialize")
    }

    #[getter]
    fn scenario_id(&self) -> &str {
        &self.inner.scenario_id
    }

    /// Effects as rows of -1/0/1, proposals A..C by attribute.
    #[getter]
    fn matrix(&self) -> Vec<Vec<i32>> {
        Proposal::ALL
            .iter()
            .map(|&p| {
                AttributeId::ALL
                    .iter()
                    .map(|&a| self.inner.matrix.effect(Cell::new(p, a)).value())
                    .collect()
            })
            .collect()
    }

    #[getter]
    fn target_valence(&self) -> Vec<i32> {
        AttributeId::ALL.iter().map(|&a| self.inner.target_valence.get(a).value()).collect()
    }

    #[getter]
    fn persuader_goal(&self) -> &'static str {
        self.inner.persuader_goal.label()
    }

    #[getter]
    fn p_init(&self) -> &'static str {
        self.inner.p_init.label()
    }

    #[getter]
    fn p_full(&self) -> &'static str {
        self.inner.p_full.label()
    }

    #[getter]
    fn hidden(&self) -> Vec<(String, usize)> {
        mask_cells(self.inner.hidden)
    }

    #[getter]
    fn witness(&self) -> Vec<(String, usize)> {
        mask_cells(self.inner.witness)
    }

    /// Target utilities after truthfully revealing the given hidden cells.
    #[pyo3(signature = (revealed=Vec::new()))]
    fn target_utilities(&self, revealed: Vec<(String, usize)>) -> PyResult<Vec<i32>> {
        let mut mask = CellMask::EMPTY;
        for (p, a) in revealed {
            mask.insert(parse_cell(&p, a).map_err(PyValueError::new_err)?);
        }
        Ok(self.inner.target_utilities(mask).map_err(value_err)?.to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(scenario={:?}, goal={}, p_init={}, p_full={})",
            self.inner.scenario_id, self.inner.persuader_goal, self.inner.p_init, self.inner.p_full
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Generate `count` valid instances for one scenario.
#[pyfunction]
#[pyo3(signature = (seed, scenario_id, count, canonical_only=false))]
fn generate(py: Python<'_>, seed: u64, scenario_id: &str, count: usize, canonical_only: bool) -> PyResult<Vec<PyInstance>> {
    let s = scenario::by_id(scenario_id).ok_or_else(|| PyValueError::new_err(format!("unknown scenario {scenario_id:?}")))?;
    let opts = GenerateOptions {
        canonical_only,
        ..Default::default()
    };
    let out = py.detach(|| forge::generate(seed, &s, count, &opts)).map_err(value_err)?;
    Ok(out.into_iter().map(|inner| PyInstance { inner }).collect())
}

/// Per-constraint report, with an added `valid` key.
#[pyfunction]
fn check_instance<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyAny>> {
    let report = forge::check_instance(&instance.inner);
    let mut v = serde_json::to_value(report).expect("reports serialize");
    v["valid"] = serde_json::Value::Bool(report.is_valid());
    to_py(py, &v)
}

/// Every subset of the hidden cells whose disclosure leaves the goal as the strict best.
#[pyfunction]
fn winning_subsets(instance: &PyInstance) -> Vec<Vec<(String, usize)>> {
    forge::winning_subsets(&instance.inner).into_iter().map(mask_cells).collect()
}

fn scenario_ids() -> Vec<String> {
    scenario::all().into_iter().map(|s| s.id).collect()
}

/// The rational target, driven claim by claim.
#[pyclass(name = "Bot", module = "mindgames")]
pub struct PyBot {
    inner: BotState,
}

#[pymethods]
impl PyBot {
    #[new]
    #[pyo3(signature = (instance, valence=None))]
    fn new(instance: &PyInstance, valence: Option<[i64; 3]>) -> PyResult<Self> {
        let inner = match valence {
            Some(v) => BotState::with_valence(&instance.inner, ValenceVector::from_values(v).map_err(value_err)?),
            None => BotState::new(&instance.inner),
        };
        Ok(PyBot { inner })
    }

    /// Take a claim at face value. Returns True when the choice changed.
    fn disclose(&mut self, proposal: &str, attribute: usize, effect: i64) -> PyResult<bool> {
        let cell = parse_cell(proposal, attribute).map_err(PyValueError::new_err)?;
        let effect = Effect::try_from(effect).map_err(value_err)?;
        Ok(self.inner.ingest(&[Claim::new(cell.proposal, cell.attribute, effect)]))
    }

    #[getter]
    fn choice(&self) -> &'static str {
        self.inner.choice().label()
    }

    #[getter]
    fn utilities(&self) -> Vec<i32> {
        self.inner.utilities().to_vec()
    }

    fn belief(&self, proposal: &str, attribute: usize) -> PyResult<Option<i32>> {
        let cell = parse_cell(proposal, attribute).map_err(PyValueError::new_err)?;
        Ok(self.inner.belief(cell).map(Effect::value))
    }
}

/// A live game against the bot, with the caller as persuader.
#[pyclass(name = "Session", module = "mindgames")]
pub struct PySession {
    inner: session::Session,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (instance, condition="hidden", classifier="structured", max_turns=None))]
    fn new(instance: &PyInstance, condition: &str, classifier: &str, max_turns: Option<usize>) -> PyResult<Self> {
        let kind = parse_classifier(classifier).map_err(PyValueError::new_err)?;
        let mut config = SessionConfig::bot_game(
            instance.inner.clone(),
            parse_condition(condition).map_err(PyValueError::new_err)?,
            PersuaderKind::Human,
            kind,
        );
        if let Some(t) = max_turns {
            config.max_persuader_turns = t;
        }
        let classifier = build_classifier(kind, None).map_err(value_err)?;
        Ok(PySession {
            inner: session::Session::new(config, classifier).map_err(value_err)?,
        })
    }

    /// Send a persuader message; returns the new events, bot reply last.
    fn post<'py>(&mut self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let events = self.inner.post(Role::Persuader, text).map_err(value_err)?;
        to_py(py, &events)
    }

    /// End the game; returns the bot's final choice.
    fn finish(&mut self) -> PyResult<&'static str> {
        Ok(self.inner.finish().map_err(value_err)?.label())
    }

    #[getter]
    fn ended(&self) -> bool {
        self.inner.is_ended()
    }

    #[getter]
    fn turns_left(&self) -> usize {
        self.inner.persuader_turns_left()
    }

    /// What the persuader is shown.
    fn view<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.agent_view())
    }

    fn transcript_jsonl(&self) -> PyResult<String> {
        Ok(to_jsonl(&self.inner.transcript().map_err(value_err)?))
    }
}

/// Play one automated game against the bot; returns `(success, transcript_jsonl)`.
#[pyfunction]
#[pyo3(signature = (instance, condition="hidden", persuader="optimal", seed=0, draws=6))]
fn play(py: Python<'_>, instance: &PyInstance, condition: &str, persuader: &str, seed: u64, draws: usize) -> PyResult<(bool, String)> {
    let condition = parse_condition(condition).map_err(PyValueError::new_err)?;
    let (kind, mut agent): (PersuaderKind, Box<dyn Persuader>) = match persuader {
        "optimal" => (PersuaderKind::Optimal, Box::new(OptimalPersuader::new())),
        "random" => (PersuaderKind::Random, Box::new(RandomPersuader::new(seed, draws))),
        other => return Err(PyValueError::new_err(format!("unknown persuader {other:?}"))),
    };
    let mut config = SessionConfig::bot_game(instance.inner.clone(), condition, kind, ClassifierKind::Structured);
    config.seed = seed;
    if kind == PersuaderKind::Random {
        config.random_draws = Some(draws);
    }
    let classifier = build_classifier(ClassifierKind::Structured, None).map_err(value_err)?;
    let t = py
        .detach(move || session::run_bot_game(config, classifier, agent.as_mut()))
        .map_err(value_err)?;
    Ok((t.success, to_jsonl(&t)))
}

/// Closed-form success of n uniform random disclosures.
#[pyfunction]
fn p_win_closed(n: u32) -> f64 {
    analytics::p_win_closed(n)
}

/// Dynamic-programming check of the same probability.
#[pyfunction]
fn p_win_oracle(n: u32) -> f64 {
    analytics::p_win_oracle(n)
}

/// Percentile bootstrap interval for the mean.
#[pyfunction]
#[pyo3(signature = (values, iterations=analytics::DEFAULT_BOOTSTRAP_ITERATIONS, level=0.95, seed=0))]
fn bootstrap_ci(py: Python<'_>, values: Vec<f64>, iterations: usize, level: f64, seed: u64) -> PyResult<(f64, f64)> {
    py.detach(|| analytics::bootstrap_ci(&values, iterations, level, seed)).map_err(value_err)
}

/// Map a five-point survey answer to -1, 0 or 1.
#[pyfunction]
fn likert_to_valence(label: &str) -> PyResult<i32> {
    let r: analytics::LikertResponse = label.parse().map_err(value_err)?;
    Ok(analytics::likert_to_valence(r).value())
}

#[pymodule]
fn mindgames(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyBot>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(check_instance, m)?)?;
    m.add_function(wrap_pyfunction!(winning_subsets, m)?)?;
    m.add_function(wrap_pyfunction!(play, m)?)?;
    m.add_function(wrap_pyfunction!(p_win_closed, m)?)?;
    m.add_function(wrap_pyfunction!(p_win_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_ci, m)?)?;
    m.add_function(wrap_pyfunction!(likert_to_valence, m)?)?;
    m.add("SCENARIOS", scenario_ids())?;
    Ok(())
}
