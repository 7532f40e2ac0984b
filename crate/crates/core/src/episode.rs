//! Episode logs: the unit of persistence for simulated and live sessions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::caregiver::{ScriptedCaregiver, SimCaregiver};
use crate::feedback::{FeedbackCondition, FeedbackSignal, PositivePair};
use crate::homeostasis::{NeedKind, PerNeed};
use crate::language::{Reward, WordNeedValues};
use crate::metrics::{convergence_time, moving_average_reward, RewardSeries};
use crate::perception::ObjectKind;
use crate::session::{converged_at, run_episode, run_episode_with, SessionConfig, SessionError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub n: usize,
    pub expressed_need: NeedKind,
    pub word: String,
    pub offered_object: ObjectKind,
    /// Set only when recognition decides the outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recognized_object: Option<ObjectKind>,
    pub reward: Reward,
    pub feedback: FeedbackSignal,
    pub mar: f64,
    pub levels_at_expression: PerNeed<f64>,
    /// Levels at the end of the trial.
    pub homeostatic_snapshot: PerNeed<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl TrialRecord {
    /// The object whose identity decided the reward.
    pub fn judged_object(&self) -> ObjectKind {
        self.recognized_object.unwrap_or(self.offered_object)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub som: DenseArray,
    pub som_labels: Vec<[u32; 3]>,
    pub perceptron: DenseArray,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikertAnswer {
    pub question: String,
    pub value: u8,
}

/// Self-assessment manikin ratings, each on a 1 to 5 scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamRating {
    pub valence: u8,
    pub arousal: u8,
    pub dominance: u8,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub likert_answers: Vec<LikertAnswer>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("{field} = {value} is outside 1..=5")]
pub struct RangeViolation {
    pub field: String,
    pub value: i64,
}

impl SamRating {
    pub fn validate(&self) -> Result<(), RangeViolation> {
        let check = |field: &str, v: u8| {
            if (1..=5).contains(&v) {
                Ok(())
            } else {
                Err(RangeViolation {
                    field: field.to_string(),
                    value: v as i64,
                })
            }
        };
        check("valence", self.valence)?;
        check("arousal", self.arousal)?;
        check("dominance", self.dominance)?;
        for a in &self.likert_answers {
            check(&format!("likert_answers.{}", a.question), a.value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeLog {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub config: SessionConfig,
    pub trials: Vec<TrialRecord>,
    pub converged: bool,
    pub convergence_time: Option<usize>,
    pub final_q: WordNeedValues,
    pub models: ModelDump,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caregiver: Option<SimCaregiver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<SamRating>,
}

/// A field that failed a schema or consistency check.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("{field}: {detail}")]
pub struct LogViolation {
    pub field: String,
    pub detail: String,
}

impl LogViolation {
    fn new(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            detail: detail.into(),
        }
    }
}

impl EpisodeLog {
    pub fn rewards(&self) -> RewardSeries {
        self.trials.iter().map(|t| t.reward).collect()
    }

    pub fn final_mar(&self) -> Option<f64> {
        self.trials.last().map(|t| t.mar)
    }

    pub fn condition(&self) -> FeedbackCondition {
        self.config.condition
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("log serializes");
        s.push('\n');
        s
    }

    /// Parses a log, reporting the path of the first offending field.
    pub fn from_json(text: &str) -> Result<Self, LogViolation> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let log: EpisodeLog = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            LogViolation::new(if path.is_empty() { ".".to_string() } else { path }, e.inner().to_string())
        })?;
        Ok(log)
    }

    pub fn read(path: &Path) -> std::io::Result<Result<Self, LogViolation>> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?))
    }

    /// Checks the invariants every log must satisfy, independently of the
    /// engine that produced it.
    pub fn validate(&self) -> Result<(), LogViolation> {
        let c = &self.config;
        c.validate().map_err(|e| LogViolation::new("config", e.to_string()))?;
        if self.trials.is_empty() || self.trials.len() > c.max_iterations {
            return Err(LogViolation::new(
                "trials",
                format!("length {} outside [1, {}]", self.trials.len(), c.max_iterations),
            ));
        }
        let mut rewards = RewardSeries::default();
        for (i, t) in self.trials.iter().enumerate() {
            let at = |f: &str| format!("trials[{i}].{f}");
            if t.n != i + 1 {
                return Err(LogViolation::new(at("n"), format!("expected {}, found {}", i + 1, t.n)));
            }
            if self.final_q.vocabulary().position(&t.word).is_none() {
                return Err(LogViolation::new(at("word"), format!("{:?} is not in the vocabulary", t.word)));
            }
            if t.recognized_object.is_some() != c.perception_in_loop {
                return Err(LogViolation::new(
                    at("recognized_object"),
                    "present exactly when recognition decides the outcome",
                ));
            }
            let success = t.judged_object().satisfies() == t.expressed_need;
            if t.reward != Reward::from_outcome(success) {
                return Err(LogViolation::new(
                    at("reward"),
                    format!(
                        "{} disagrees with {} offered for {}",
                        t.reward.value(),
                        t.judged_object(),
                        t.expressed_need
                    ),
                ));
            }
            if t.feedback.is_positive() != success {
                return Err(LogViolation::new(at("feedback"), "valence disagrees with reward"));
            }
            if c.condition == FeedbackCondition::Dot
                && success
                && t.feedback.positive_pair() != Some(PositivePair::for_need(t.expressed_need))
            {
                return Err(LogViolation::new(at("feedback"), "positive pair differs from the need's pair"));
            }
            for need in NeedKind::ALL {
                for (name, v) in [
                    ("levels_at_expression", t.levels_at_expression[need]),
                    ("homeostatic_snapshot", t.homeostatic_snapshot[need]),
                ] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(LogViolation::new(at(&format!("{name}.{need}")), format!("{v} outside [0, 1]")));
                    }
                }
            }
            rewards.push(t.reward);
            let mar = moving_average_reward(&rewards, c.mar_window, i + 1).expect("n in range");
            if t.mar != mar {
                return Err(LogViolation::new(at("mar"), format!("expected {mar}, found {}", t.mar)));
            }
            let prefix_done = i + 1 < self.trials.len()
                && (converged_at(&rewards, c) || rewards.len() >= c.max_iterations);
            if prefix_done {
                return Err(LogViolation::new(at("n"), "episode continued past its termination point"));
            }
        }
        let expected_ct = convergence_time(&rewards, c.mar_window, c.convergence_mar_threshold).expect("window");
        if self.convergence_time != expected_ct {
            return Err(LogViolation::new(
                "convergence_time",
                format!("expected {expected_ct:?}, found {:?}", self.convergence_time),
            ));
        }
        let converged = converged_at(&rewards, c);
        if self.converged != converged {
            return Err(LogViolation::new("converged", format!("expected {converged}, found {}", self.converged)));
        }
        if rewards.len() < c.max_iterations && !converged {
            return Err(LogViolation::new("trials", "episode ended before its termination point"));
        }
        if let Some(s) = &self.survey {
            s.validate()
                .map_err(|e| LogViolation::new(format!("survey.{}", e.field), e.to_string()))?;
        }
        Ok(())
    }

    /// Re-runs the episode from its config. Live logs, which have no
    /// simulated caregiver, are replayed with their recorded objects.
    pub fn replay(&self) -> Result<EpisodeLog, SessionError> {
        let mut log = if self.config.caregiver.is_some() {
            run_episode(&self.config)?
        } else {
            let script = self.trials.iter().map(|t| t.offered_object).collect();
            run_episode_with(self.config.clone(), &mut ScriptedCaregiver::new(script))?
        };
        log.id = self.id.clone();
        log.survey = self.survey.clone();
        for (t, orig) in log.trials.iter_mut().zip(&self.trials) {
            t.latency_ms = orig.latency_ms;
        }
        Ok(log)
    }

    pub fn replays_to_itself(&self) -> Result<bool, SessionError> {
        Ok(self.replay()? == *self)
    }
}
