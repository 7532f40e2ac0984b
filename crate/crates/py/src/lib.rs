//! Python bindings. Configs, logs and events cross the boundary as JSON
//! strings in the same format the Rust side reads and writes.

use babble_core::feedback::FeedbackMap;
use babble_core::harness::{run_logs, summarize_logs, ExperimentPlan};
use babble_core::homeostasis::{compute_motivation as motivation, Drive};
use babble_core::language::build_vocabulary as build_vocab;
use babble_core::metrics::{self, RewardSeries};
use babble_core::perception::StimulusIntensity;
use babble_core::rng::{substream, Stream};
use babble_core::{EpisodeLog, FeedbackCondition, NeedKind, ObjectKind, SessionConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config_from(json: Option<&str>) -> PyResult<SessionConfig> {
    match json {
        None => Ok(SessionConfig::default()),
        Some(s) => serde_json::from_str(s).map_err(err),
    }
}

fn need(s: &str) -> PyResult<NeedKind> {
    NeedKind::ALL
        .into_iter()
        .find(|n| n.as_str() == s)
        .ok_or_else(|| err(format!("unknown need `{s}`")))
}

fn series(rewards: Vec<i64>) -> PyResult<RewardSeries> {
    RewardSeries::from_values(&rewards).map_err(err)
}

/// Motivation `d + d*s` for a drive and a stimulus intensity.
#[pyfunction]
fn compute_motivation(drive: f64, stimulus: f64) -> f64 {
    let n = NeedKind::Hunger;
    motivation(Drive { need: n, value: drive }, StimulusIntensity::new(n, stimulus)).value
}

#[pyfunction]
fn moving_average_reward(rewards: Vec<i64>, m: usize, n: usize) -> PyResult<f64> {
    metrics::moving_average_reward(&series(rewards)?, m, n).map_err(err)
}

#[pyfunction]
fn mar_curve(rewards: Vec<i64>, m: usize) -> PyResult<Vec<f64>> {
    metrics::mar_curve(&series(rewards)?, m).map_err(err)
}

#[pyfunction]
fn convergence_time(rewards: Vec<i64>, m: usize, threshold: f64) -> PyResult<Option<usize>> {
    metrics::convergence_time(&series(rewards)?, m, threshold).map_err(err)
}

#[pyfunction]
fn build_vocabulary(syllables: Vec<String>, n_words: usize, seed: u64) -> PyResult<Vec<String>> {
    let v = build_vocab(&syllables, n_words, &mut substream(seed, Stream::Vocabulary)).map_err(err)?;
    Ok(v.words().iter().map(|w| w.text().to_string()).collect())
}

/// `(valence, motion, sound)` for a success on `need`.
#[pyfunction]
fn positive_feedback(condition: &str, need_name: &str, seed: u64) -> PyResult<(String, String, String)> {
    let c = FeedbackCondition::parse(condition).ok_or_else(|| err(format!("unknown condition `{condition}`")))?;
    let s = FeedbackMap::new(c).positive_feedback(need(need_name)?, &mut substream(seed, Stream::Feedback));
    let v = serde_json::to_value(s.valence()).map_err(err)?;
    Ok((
        v.as_str().unwrap_or_default().to_string(),
        s.motion().as_str().to_string(),
        s.sound().as_str().to_string(),
    ))
}

#[pyfunction]
fn default_config() -> String {
    serde_json::to_string_pretty(&SessionConfig::default()).expect("config serializes")
}

/// Runs one simulated episode and returns its log as JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn run_episode(config_json: Option<&str>) -> PyResult<String> {
    let log = babble_core::run_episode(&config_from(config_json)?).map_err(err)?;
    Ok(log.to_json())
}

/// Runs an experiment plan (TOML) in memory and returns the summary as JSON.
#[pyfunction]
fn run_plan(plan_toml: &str) -> PyResult<String> {
    let plan = ExperimentPlan::from_toml(plan_toml).map_err(err)?;
    let logs = run_logs(&plan).map_err(err)?;
    Ok(summarize_logs(&logs).to_json())
}

/// Validates a log; raises `ValueError` naming the offending field.
#[pyfunction]
fn validate_log(log_json: &str) -> PyResult<()> {
    let log = EpisodeLog::from_json(log_json).map_err(err)?;
    log.validate().map_err(err)
}

#[pyfunction]
fn replays_to_itself(log_json: &str) -> PyResult<bool> {
    let log = EpisodeLog::from_json(log_json).map_err(err)?;
    log.replays_to_itself().map_err(err)
}

/// A session driven step by step from Python.
#[pyclass]
struct Session {
    inner: babble_core::Session,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (config_json=None))]
    fn new(config_json: Option<&str>) -> PyResult<Self> {
        Ok(Self {
            inner: babble_core::Session::new(config_from(config_json)?).map_err(err)?,
        })
    }

    #[getter]
    fn phase(&self) -> PyResult<String> {
        let v = serde_json::to_value(self.inner.phase()).map_err(err)?;
        Ok(v.as_str().unwrap_or_default().to_string())
    }

    #[getter]
    fn word(&self) -> Option<String> {
        self.inner.current_word().map(str::to_string)
    }

    #[getter]
    fn expressed_need(&self) -> Option<String> {
        self.inner.expressed_need().map(|n| n.as_str().to_string())
    }

    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials().len()
    }

    #[getter]
    fn terminated(&self) -> bool {
        self.inner.is_terminated()
    }

    /// One phase transition; returns the emitted events as JSON strings.
    #[pyo3(signature = (object=None))]
    fn advance(&mut self, object: Option<&str>) -> PyResult<Vec<String>> {
        let input = object
            .map(|o| ObjectKind::parse(o).ok_or_else(|| err(format!("unknown object `{o}`"))))
            .transpose()?;
        let events = self.inner.advance(input).map_err(err)?;
        events.iter().map(|e| serde_json::to_string(e).map_err(err)).collect()
    }

    fn to_log(&self) -> String {
        self.inner.to_log().to_json()
    }
}

#[pymodule]
pub fn babble(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compute_motivation, m)?)?;
    m.add_function(wrap_pyfunction!(moving_average_reward, m)?)?;
    m.add_function(wrap_pyfunction!(mar_curve, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_time, m)?)?;
    m.add_function(wrap_pyfunction!(build_vocabulary, m)?)?;
    m.add_function(wrap_pyfunction!(positive_feedback, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(run_plan, m)?)?;
    m.add_function(wrap_pyfunction!(validate_log, m)?)?;
    m.add_function(wrap_pyfunction!(replays_to_itself, m)?)?;
    m.add_class::<Session>()?;
    Ok(())
}
