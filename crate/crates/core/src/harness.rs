//! Batch experiments: paired-seed sweeps over feedback conditions, written
//! out as episode logs, a flat trials table, per-condition MAR curves and a
//! summary document. [`summarize`] rebuilds everything from the logs and
//! checks the cached tables against it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::EpisodeLog;
use crate::feedback::FeedbackCondition;
use crate::metrics::{aggregate_runs, mean_and_population_sd, CurveAggregate, RewardSeries};
use crate::rng::{substream, Stream};
use crate::session::{run_episode, SessionConfig, SessionError};

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
pub const EPISODE_DIR: &str = "episodes";
pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt log {file}: field `{field}`: {detail}")]
    CorruptLog { file: PathBuf, field: String, detail: String },
    #[error("cached outputs disagree with recomputation: {}", .files.join(", "))]
    Mismatch { files: Vec<String> },
    #[error("no episode logs found under {0}")]
    NoLogs(PathBuf),
}

impl HarnessError {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } | HarnessError::NoLogs(_) => 3,
            HarnessError::CorruptLog { .. } | HarnessError::Mismatch { .. } => 4,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}

impl From<SessionError> for HarnessError {
    fn from(e: SessionError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub base_config: SessionConfig,
    pub n_runs_per_condition: usize,
    #[serde(default)]
    pub seed_base: u64,
    pub conditions: Vec<FeedbackCondition>,
    pub output_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let plan: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    /// Reads a plan file; a relative `output_dir` resolves against the
    /// directory holding the file.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut plan = Self::from_toml(&text)?;
        if plan.output_dir.is_relative() {
            if let Some(parent) = path.parent() {
                plan.output_dir = parent.join(&plan.output_dir);
            }
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_runs_per_condition == 0 {
            return Err(HarnessError::Config("n_runs_per_condition must be at least 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(HarnessError::Config("conditions must not be empty".into()));
        }
        if self.base_config.caregiver.is_none() {
            return Err(HarnessError::Config("batch runs need a simulated caregiver".into()));
        }
        self.base_config.validate()?;
        Ok(())
    }

    /// Conditions in canonical order with duplicates removed.
    pub fn condition_order(&self) -> Vec<FeedbackCondition> {
        let mut c = self.conditions.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn run_config(&self, condition: FeedbackCondition, k: usize) -> SessionConfig {
        SessionConfig {
            condition,
            seed: self.seed_base.wrapping_add(k as u64),
            ..self.base_config.clone()
        }
    }
}

pub fn run_id(condition: FeedbackCondition, k: usize) -> String {
    format!("{}_{:04}", condition.as_str(), k)
}

/// Runs every episode of the plan without touching the file system, in
/// condition order then run index.
pub fn run_logs(plan: &ExperimentPlan) -> Result<Vec<EpisodeLog>, HarnessError> {
    plan.validate()?;
    let jobs: Vec<(FeedbackCondition, usize)> = plan
        .condition_order()
        .into_iter()
        .flat_map(|c| (0..plan.n_runs_per_condition).map(move |k| (c, k)))
        .collect();
    jobs.par_iter()
        .map(|&(c, k)| {
            let mut log = run_episode(&plan.run_config(c, k))?;
            log.id = Some(run_id(c, k));
            Ok(log)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: FeedbackCondition,
    pub runs: usize,
    pub mean_final_mar: f64,
    pub convergence_fraction: f64,
    /// Mean over runs whose MAR reached the threshold at some iteration.
    pub mean_convergence_time: Option<f64>,
    pub runs_with_convergence_time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub pairs: usize,
    pub mean_difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
    pub bootstrap_seed: u64,
}

impl PairedDifference {
    pub fn ci_excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub conditions: Vec<ConditionSummary>,
    /// DOT minus NonDOT final MAR over seeds run in both conditions.
    pub dot_minus_nondot: Option<PairedDifference>,
}

impl Summary {
    pub fn condition(&self, c: FeedbackCondition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|s| s.condition == c)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Percentile bootstrap of the mean of `diffs`.
pub fn paired_bootstrap_ci<R: Rng + ?Sized>(diffs: &[f64], resamples: usize, level: f64, rng: &mut R) -> (f64, f64) {
    if diffs.is_empty() || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n = diffs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = ((tail * resamples as f64).floor() as usize).min(resamples - 1);
    let hi = (((1.0 - tail) * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    (means[lo], means[hi])
}

fn final_mar(log: &EpisodeLog) -> f64 {
    log.final_mar().unwrap_or(f64::NAN)
}

pub fn summarize_logs(logs: &[EpisodeLog]) -> Summary {
    let mut by_cond: BTreeMap<FeedbackCondition, Vec<&EpisodeLog>> = BTreeMap::new();
    for l in logs {
        by_cond.entry(l.condition()).or_default().push(l);
    }
    let conditions = by_cond
        .iter()
        .map(|(&condition, ls)| {
            let finals: Vec<f64> = ls.iter().map(|l| final_mar(l)).collect();
            let times: Vec<f64> = ls.iter().filter_map(|l| l.convergence_time).map(|t| t as f64).collect();
            ConditionSummary {
                condition,
                runs: ls.len(),
                mean_final_mar: mean_and_population_sd(&finals).0,
                convergence_fraction: ls.iter().filter(|l| l.converged).count() as f64 / ls.len() as f64,
                mean_convergence_time: (!times.is_empty()).then(|| mean_and_population_sd(&times).0),
                runs_with_convergence_time: times.len(),
            }
        })
        .collect();

    let seeds = |c| -> BTreeMap<u64, f64> {
        by_cond
            .get(&c)
            .map(|ls| ls.iter().map(|l| (l.config.seed, final_mar(l))).collect())
            .unwrap_or_default()
    };
    let dot = seeds(FeedbackCondition::Dot);
    let nondot = seeds(FeedbackCondition::NonDot);
    let diffs: Vec<f64> = dot
        .iter()
        .filter_map(|(s, d)| nondot.get(s).map(|n| d - n))
        .collect();
    let dot_minus_nondot = (!diffs.is_empty()).then(|| {
        let bootstrap_seed = logs.iter().map(|l| l.config.seed).min().unwrap_or(0);
        let mut rng = substream(bootstrap_seed, Stream::Bootstrap);
        let (ci_low, ci_high) = paired_bootstrap_ci(&diffs, BOOTSTRAP_RESAMPLES, 0.95, &mut rng);
        PairedDifference {
            pairs: diffs.len(),
            mean_difference: mean_and_population_sd(&diffs).0,
            ci_low,
            ci_high,
            resamples: BOOTSTRAP_RESAMPLES,
            bootstrap_seed,
        }
    });
    Summary { conditions, dot_minus_nondot }
}

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    run_id: &'a str,
    condition: &'static str,
    seed: u64,
    n: usize,
    expressed_need: &'static str,
    word: &'a str,
    object: &'static str,
    reward: i64,
    mar: f64,
    converged: bool,
    convergence_time: Option<usize>,
}

#[derive(Debug, Serialize)]
struct AggregateRow {
    iteration: usize,
    mean_mar: f64,
    sd_mar: f64,
    count: usize,
    condition: &'static str,
}

fn csv_text<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn trials_csv(logs: &[EpisodeLog]) -> String {
    let rows = logs.iter().flat_map(|l| {
        let id = l.id.as_deref().unwrap_or("");
        l.trials.iter().map(move |t| TrialRow {
            run_id: id,
            condition: l.condition().as_str(),
            seed: l.config.seed,
            n: t.n,
            expressed_need: t.expressed_need.as_str(),
            word: &t.word,
            object: t.offered_object.as_str(),
            reward: t.reward.value(),
            mar: t.mar,
            converged: l.converged,
            convergence_time: l.convergence_time,
        })
    });
    csv_text(rows)
}

pub fn aggregate_file_name(c: FeedbackCondition) -> String {
    format!("aggregate_{}.csv", c.as_str())
}

/// MAR curves per condition. Runs in one condition must share a window.
pub fn condition_aggregates(logs: &[EpisodeLog]) -> BTreeMap<FeedbackCondition, Vec<CurveAggregate>> {
    let mut by_cond: BTreeMap<FeedbackCondition, (usize, Vec<RewardSeries>)> = BTreeMap::new();
    for l in logs {
        let e = by_cond.entry(l.condition()).or_insert((l.config.mar_window, Vec::new()));
        e.1.push(l.rewards());
    }
    by_cond
        .into_iter()
        .map(|(c, (m, series))| (c, aggregate_runs(&series, m).unwrap_or_default()))
        .collect()
}

pub fn aggregate_csv(condition: FeedbackCondition, curve: &[CurveAggregate]) -> String {
    csv_text(curve.iter().map(|a| AggregateRow {
        iteration: a.iteration,
        mean_mar: a.mean,
        sd_mar: a.sd,
        count: a.count,
        condition: condition.as_str(),
    }))
}

/// Every derived file, keyed by path relative to the results directory.
pub fn derived_outputs(logs: &[EpisodeLog]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    out.insert(TRIALS_FILE.to_string(), trials_csv(logs));
    for (c, curve) in condition_aggregates(logs) {
        out.insert(aggregate_file_name(c), aggregate_csv(c, &curve));
    }
    out.insert(SUMMARY_FILE.to_string(), summarize_logs(logs).to_json());
    out
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn episode_file_name(log: &EpisodeLog) -> String {
    format!("{}.json", log.id.as_deref().unwrap_or("episode"))
}

/// Runs the plan and writes all outputs under `plan.output_dir`.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Summary, HarnessError> {
    let logs = run_logs(plan)?;
    let dir = &plan.output_dir;
    let ep_dir = dir.join(EPISODE_DIR);
    fs::create_dir_all(&ep_dir).map_err(|e| HarnessError::io(&ep_dir, e))?;
    logs.par_iter()
        .try_for_each(|l| write(&ep_dir.join(episode_file_name(l)), &l.to_json()))?;
    for (name, text) in derived_outputs(&logs) {
        write(&dir.join(name), &text)?;
    }
    Ok(summarize_logs(&logs))
}

fn load_logs(dir: &Path) -> Result<Vec<EpisodeLog>, HarnessError> {
    let ep_dir = dir.join(EPISODE_DIR);
    if !ep_dir.is_dir() {
        return Err(HarnessError::NoLogs(dir.to_path_buf()));
    }
    let mut paths = Vec::new();
    for entry in fs::read_dir(&ep_dir).map_err(|e| HarnessError::io(&ep_dir, e))? {
        let p = entry.map_err(|e| HarnessError::io(&ep_dir, e))?.path();
        if p.extension().is_some_and(|x| x == "json") {
            paths.push(p);
        }
    }
    if paths.is_empty() {
        return Err(HarnessError::NoLogs(dir.to_path_buf()));
    }
    paths.sort();
    let mut logs = paths
        .par_iter()
        .map(|p| {
            let parsed = EpisodeLog::read(p).map_err(|e| HarnessError::io(p, e))?;
            let log = parsed.and_then(|l| l.validate().map(|_| l)).map_err(|v| HarnessError::CorruptLog {
                file: p.clone(),
                field: v.field,
                detail: v.detail,
            })?;
            Ok(log)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    logs.sort_by_key(|l| (l.condition(), l.config.seed));
    Ok(logs)
}

/// Recomputes all derived outputs from the episode logs in `dir` and
/// compares them with the files on disk.
pub fn summarize(dir: &Path) -> Result<Summary, HarnessError> {
    let logs = load_logs(dir)?;
    let mut mismatched = Vec::new();
    for (name, expected) in derived_outputs(&logs) {
        let path = dir.join(&name);
        match fs::read_to_string(&path) {
            Ok(cached) if cached == expected => {}
            Ok(_) => mismatched.push(name),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => mismatched.push(name),
            Err(e) => return Err(HarnessError::io(&path, e)),
        }
    }
    if mismatched.is_empty() {
        Ok(summarize_logs(&logs))
    } else {
        Err(HarnessError::Mismatch { files: mismatched })
    }
}
