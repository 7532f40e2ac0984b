//! The interaction loop as an explicit phase machine.
//!
//! One trial walks `NeedArises -> Babbled -> AwaitingObject -> Evaluated ->
//! FeedbackEmitted -> Updated`, then either starts the next trial or
//! terminates. Every call to [`Session::advance`] performs exactly one
//! transition; only `AwaitingObject` accepts an object from outside.

use serde::{Deserialize, Serialize};

use crate::caregiver::{AssociativeParams, Caregiver, CaregiverKind, ResponseContext, SimCaregiver};
use crate::episode::{DenseArray, EpisodeLog, ModelDump, TrialRecord};
use crate::feedback::{negative_feedback, FeedbackCondition, FeedbackMap, FeedbackSignal};
use crate::homeostasis::{
    compute_motivation, select_expressed_need, ExpressionThreshold, HomeostaticState, Motivation, NeedKind,
    PerNeed,
};
use crate::language::{LanguageError, PolicySchedule, Reward, VocabularyConfig, WordNeedValues};
use crate::metrics::{convergence_time, moving_average_reward, RewardSeries};
use crate::perception::{
    synth_features, FeatureVector, ObjectKind, ObjectRecognizer, PerceptionConfig, PerceptionError,
    StimulusIntensity,
};
use crate::rng::{substream, SessionRng, Stream, Streams};

/// Decay sub-steps allowed while waiting for a need to cross the threshold.
pub const MAX_DECAY_SUBSTEPS: u32 = 1000;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("object offered during phase {phase:?}")]
    UnexpectedInput { phase: SessionPhase },
    #[error("an object is required while awaiting the caregiver")]
    MissingInput,
    #[error("session has terminated")]
    SessionTerminated,
    #[error("no need crossed the expression threshold within {0} decay steps")]
    DegenerateConfig(u32),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaregiverConfig {
    pub kind: CaregiverKind,
    #[serde(default)]
    pub params: AssociativeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub condition: FeedbackCondition,
    pub seed: u64,
    pub theta: f64,
    /// Initial levels and per-need dynamics.
    pub homeostasis: HomeostaticState,
    pub vocabulary: VocabularyConfig,
    /// Step size of the word/need value update.
    pub alpha: f64,
    pub policy: PolicySchedule,
    pub perception: PerceptionConfig,
    /// Absent for live sessions driven by a human.
    pub caregiver: Option<CaregiverConfig>,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub convergence_mar_threshold: f64,
    pub mar_window: usize,
    #[serde(alias = "perception-in-loop")]
    pub perception_in_loop: bool,
    #[serde(alias = "nondot-fixed-shuffle")]
    pub nondot_fixed_shuffle: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            condition: FeedbackCondition::Dot,
            seed: 0,
            theta: 0.6,
            homeostasis: HomeostaticState::default(),
            vocabulary: VocabularyConfig::default(),
            alpha: 0.5,
            policy: PolicySchedule::default(),
            perception: PerceptionConfig::default(),
            caregiver: Some(CaregiverConfig {
                kind: CaregiverKind::Associative,
                params: AssociativeParams::default(),
            }),
            min_iterations: 12,
            max_iterations: 16,
            convergence_mar_threshold: 0.8,
            mar_window: 5,
            perception_in_loop: false,
            nondot_fixed_shuffle: false,
        }
    }
}

impl SessionConfig {
    pub fn with_caregiver(mut self, kind: CaregiverKind) -> Self {
        let params = self.caregiver.as_ref().map(|c| c.params).unwrap_or_default();
        self.caregiver = Some(CaregiverConfig { kind, params });
        self
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let invalid = |m: String| Err(SessionError::ConfigInvalid(m));
        ExpressionThreshold::new(self.theta).map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        self.homeostasis
            .validate()
            .map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        if self.vocabulary.n_words < NeedKind::ALL.len() {
            return invalid(format!(
                "vocabulary needs at least {} words, got {}",
                NeedKind::ALL.len(),
                self.vocabulary.n_words
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("alpha must be within (0, 1], got {}", self.alpha));
        }
        self.policy
            .validate()
            .map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        self.perception
            .validate()
            .map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        if let Some(c) = &self.caregiver {
            c.params
                .validate()
                .map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations must be at least 1".into());
        }
        if self.min_iterations > self.max_iterations {
            return invalid(format!(
                "min_iterations ({}) exceeds max_iterations ({})",
                self.min_iterations, self.max_iterations
            ));
        }
        if self.mar_window == 0 {
            return invalid("mar_window must be at least 1".into());
        }
        if !self.convergence_mar_threshold.is_finite() {
            return invalid("convergence_mar_threshold must be finite".into());
        }
        Ok(())
    }
}

/// `true` once the run has converged after the minimum length, or hit the cap.
pub fn termination_check(rewards: &RewardSeries, config: &SessionConfig) -> bool {
    let n = rewards.len();
    if n == 0 {
        return false;
    }
    n >= config.max_iterations || converged_at(rewards, config)
}

/// The MAR criterion alone: at least `min_iterations` trials and the latest
/// MAR at or above the threshold.
pub fn converged_at(rewards: &RewardSeries, config: &SessionConfig) -> bool {
    let n = rewards.len();
    n >= 1
        && n >= config.min_iterations
        && moving_average_reward(rewards, config.mar_window, n)
            .map(|mar| mar >= config.convergence_mar_threshold)
            .unwrap_or(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Idle,
    NeedArises,
    Babbled,
    AwaitingObject,
    Evaluated,
    FeedbackEmitted,
    Updated,
    Terminated,
}

/// Client-visible events. None of them carries the expressed need or the
/// feedback condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Phase { phase: SessionPhase },
    Babble { word: String },
    Evaluated { object: ObjectKind, reward: Reward },
    Feedback { signal: FeedbackSignal },
    Progress { n: usize, max: usize },
    Terminated { converged: bool },
}

#[derive(Debug, Clone)]
struct PendingTrial {
    need: NeedKind,
    word: String,
    levels_at_expression: PerNeed<f64>,
    offered: Option<ObjectKind>,
    offered_features: Option<FeatureVector>,
    recognized: Option<ObjectKind>,
    reward: Option<Reward>,
    feedback: Option<FeedbackSignal>,
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    theta: ExpressionThreshold,
    phase: SessionPhase,
    homeostasis: HomeostaticState,
    values: WordNeedValues,
    recognizer: ObjectRecognizer,
    feedback_map: FeedbackMap,
    streams: Streams,
    expressions: PerNeed<u32>,
    pending: Option<PendingTrial>,
    trials: Vec<TrialRecord>,
    rewards: RewardSeries,
    finished: bool,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let theta = ExpressionThreshold::new(config.theta).map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        let vocabulary = config.vocabulary.build(&mut substream(config.seed, Stream::Vocabulary))?;
        let values = WordNeedValues::new(vocabulary, config.alpha)?;
        let recognizer = ObjectRecognizer::new(&config.perception, &mut substream(config.seed, Stream::Perception))?;
        let mut streams = Streams::new(config.seed);
        let feedback_map = if config.nondot_fixed_shuffle {
            FeedbackMap::with_fixed_shuffle(config.condition, &mut streams.feedback)
        } else {
            FeedbackMap::new(config.condition)
        };
        Ok(Self {
            homeostasis: config.homeostasis.clone(),
            theta,
            phase: SessionPhase::Idle,
            values,
            recognizer,
            feedback_map,
            streams,
            expressions: PerNeed::splat(0),
            pending: None,
            trials: Vec::new(),
            rewards: RewardSeries::default(),
            finished: false,
            config,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn rewards(&self) -> &RewardSeries {
        &self.rewards
    }

    pub fn values(&self) -> &WordNeedValues {
        &self.values
    }

    pub fn homeostasis(&self) -> &HomeostaticState {
        &self.homeostasis
    }

    pub fn recognizer(&self) -> &ObjectRecognizer {
        &self.recognizer
    }

    /// The need behind the current babble. Ground truth, hidden from clients.
    pub fn expressed_need(&self) -> Option<NeedKind> {
        self.pending.as_ref().map(|p| p.need)
    }

    pub fn current_word(&self) -> Option<&str> {
        self.pending.as_ref().filter(|p| !p.word.is_empty()).map(|p| p.word.as_str())
    }

    pub fn caregiver_rng(&mut self) -> &mut SessionRng {
        &mut self.streams.caregiver
    }

    pub fn is_terminated(&self) -> bool {
        self.phase == SessionPhase::Terminated
    }

    pub fn converged(&self) -> bool {
        converged_at(&self.rewards, &self.config)
    }

    /// Sets the latency of the most recent trial (live sessions).
    pub fn set_last_latency(&mut self, latency_ms: u64) {
        if let Some(t) = self.trials.last_mut() {
            t.latency_ms = Some(latency_ms);
        }
    }

    /// Performs one phase transition.
    pub fn advance(&mut self, input: Option<ObjectKind>) -> Result<Vec<SessionEvent>, SessionError> {
        if self.phase == SessionPhase::Terminated {
            return Err(SessionError::SessionTerminated);
        }
        match (self.phase, input) {
            (SessionPhase::AwaitingObject, None) => return Err(SessionError::MissingInput),
            (SessionPhase::AwaitingObject, Some(_)) => {}
            (phase, Some(_)) => return Err(SessionError::UnexpectedInput { phase }),
            (_, None) => {}
        }
        let mut events = Vec::with_capacity(2);
        match self.phase {
            SessionPhase::Idle => self.need_arises(&mut events)?,
            SessionPhase::Updated if self.finished => {
                events.push(SessionEvent::Phase { phase: SessionPhase::Terminated });
                events.push(SessionEvent::Terminated { converged: self.converged() });
                self.phase = SessionPhase::Terminated;
            }
            SessionPhase::Updated => self.need_arises(&mut events)?,
            SessionPhase::NeedArises => self.babble(&mut events)?,
            SessionPhase::Babbled => {
                self.phase = SessionPhase::AwaitingObject;
                events.push(SessionEvent::Phase { phase: self.phase });
            }
            SessionPhase::AwaitingObject => self.evaluate(input.expect("checked above"), &mut events),
            SessionPhase::Evaluated => self.emit_feedback(&mut events),
            SessionPhase::FeedbackEmitted => self.update(&mut events)?,
            SessionPhase::Terminated => unreachable!(),
        }
        Ok(events)
    }

    /// Stimulus intensity per need with all three objects in view: the
    /// strongest clamped prediction over the visible objects.
    fn visible_stimulus(&mut self) -> Result<PerNeed<StimulusIntensity>, SessionError> {
        let mut best = PerNeed::from_fn(|n| StimulusIntensity::new(n, 0.0));
        for object in ObjectKind::ALL {
            let vf = synth_features(
                object,
                self.config.perception.feature_dim,
                self.config.perception.noise_sigma,
                &mut self.streams.noise,
            );
            let s = self.recognizer.perceptron.stimulus(&vf)?;
            for need in NeedKind::ALL {
                if s[need].value() > best[need].value() {
                    best[need] = s[need];
                }
            }
        }
        Ok(best)
    }

    fn need_arises(&mut self, events: &mut Vec<SessionEvent>) -> Result<(), SessionError> {
        let stimulus = self.visible_stimulus()?;
        let mut steps = 0;
        let need = loop {
            self.homeostasis = self.homeostasis.decay_step();
            steps += 1;
            let motivations: Vec<Motivation> = NeedKind::ALL
                .iter()
                .map(|&n| compute_motivation(self.homeostasis.compute_drive(n), stimulus[n]))
                .collect();
            if let Some(need) = select_expressed_need(&motivations, self.theta, &mut self.streams.ties) {
                break need;
            }
            if steps >= MAX_DECAY_SUBSTEPS {
                return Err(SessionError::DegenerateConfig(steps));
            }
        };
        self.pending = Some(PendingTrial {
            need,
            word: String::new(),
            levels_at_expression: self.homeostasis.level,
            offered: None,
            offered_features: None,
            recognized: None,
            reward: None,
            feedback: None,
        });
        self.phase = SessionPhase::NeedArises;
        events.push(SessionEvent::Phase { phase: self.phase });
        Ok(())
    }

    fn pending(&mut self) -> &mut PendingTrial {
        self.pending.as_mut().expect("trial in progress")
    }

    fn babble(&mut self, events: &mut Vec<SessionEvent>) -> Result<(), SessionError> {
        let need = self.pending().need;
        let policy = self.config.policy.policy_at(self.expressions[need]);
        self.expressions[need] += 1;
        let word = self
            .values
            .choose_word(need, policy, &mut self.streams.policy)?
            .text()
            .to_string();
        self.pending().word = word.clone();
        self.phase = SessionPhase::Babbled;
        events.push(SessionEvent::Phase { phase: self.phase });
        events.push(SessionEvent::Babble { word });
        Ok(())
    }

    fn evaluate(&mut self, offered: ObjectKind, events: &mut Vec<SessionEvent>) {
        let vf = synth_features(
            offered,
            self.config.perception.feature_dim,
            self.config.perception.noise_sigma,
            &mut self.streams.noise,
        );
        let recognized = if self.config.perception_in_loop {
            // an untrained map cannot label anything yet; fall back to the true object
            Some(self.recognizer.recognize(&vf).map(|r| r.object).unwrap_or(offered))
        } else {
            None
        };
        let judged = recognized.unwrap_or(offered);
        let pending = self.pending();
        let reward = Reward::from_outcome(judged.satisfies() == pending.need);
        pending.offered = Some(offered);
        pending.offered_features = Some(vf);
        pending.recognized = recognized;
        pending.reward = Some(reward);
        self.phase = SessionPhase::Evaluated;
        events.push(SessionEvent::Phase { phase: self.phase });
        events.push(SessionEvent::Evaluated { object: offered, reward });
    }

    fn emit_feedback(&mut self, events: &mut Vec<SessionEvent>) {
        let (need, reward) = {
            let p = self.pending();
            (p.need, p.reward.expect("evaluated"))
        };
        let signal = if reward.is_success() {
            self.feedback_map.positive_feedback(need, &mut self.streams.feedback)
        } else {
            negative_feedback()
        };
        self.pending().feedback = Some(signal);
        self.phase = SessionPhase::FeedbackEmitted;
        events.push(SessionEvent::Phase { phase: self.phase });
        events.push(SessionEvent::Feedback { signal });
    }

    fn update(&mut self, events: &mut Vec<SessionEvent>) -> Result<(), SessionError> {
        let p = self.pending.take().expect("trial in progress");
        let reward = p.reward.expect("evaluated");
        let offered = p.offered.expect("evaluated");
        self.values.update_value(p.need, &p.word, reward)?;
        if reward.is_success() {
            self.homeostasis = self.homeostasis.satisfy(p.need);
        }
        self.recognizer
            .train(p.offered_features.as_ref().expect("evaluated"), offered)?;
        self.rewards.push(reward);
        let n = self.rewards.len();
        let mar = moving_average_reward(&self.rewards, self.config.mar_window, n).expect("n >= 1");
        self.trials.push(TrialRecord {
            n,
            expressed_need: p.need,
            word: p.word,
            offered_object: offered,
            recognized_object: p.recognized,
            reward,
            feedback: p.feedback.expect("feedback emitted"),
            mar,
            levels_at_expression: p.levels_at_expression,
            homeostatic_snapshot: self.homeostasis.level,
            latency_ms: None,
        });
        self.finished = termination_check(&self.rewards, &self.config);
        self.phase = SessionPhase::Updated;
        events.push(SessionEvent::Phase { phase: self.phase });
        events.push(SessionEvent::Progress {
            n,
            max: self.config.max_iterations,
        });
        Ok(())
    }

    /// Snapshot of the session as an episode log.
    pub fn to_log(&self) -> EpisodeLog {
        let (rows, cols, dim) = self.recognizer.grid.shape();
        let grid = &self.recognizer.grid;
        EpisodeLog {
            id: None,
            config: self.config.clone(),
            trials: self.trials.clone(),
            converged: self.is_terminated() && self.converged(),
            convergence_time: convergence_time(
                &self.rewards,
                self.config.mar_window,
                self.config.convergence_mar_threshold,
            )
            .expect("window validated"),
            final_q: self.values.clone(),
            models: ModelDump {
                som: DenseArray {
                    shape: vec![rows, cols, dim],
                    data: grid.weights().to_vec(),
                },
                som_labels: (0..grid.nodes()).map(|n| grid.label_counts(n)).collect(),
                perceptron: DenseArray {
                    shape: vec![dim, NeedKind::ALL.len()],
                    data: self.recognizer.perceptron.weights().to_vec(),
                },
            },
            caregiver: None,
            survey: None,
        }
    }
}

/// Drives a session to completion with any caregiver.
pub fn run_episode_with(config: SessionConfig, caregiver: &mut dyn Caregiver) -> Result<EpisodeLog, SessionError> {
    let mut session = Session::new(config)?;
    drive(&mut session, caregiver)?;
    Ok(session.to_log())
}

/// Advances until termination, calling on the caregiver at each
/// `AwaitingObject` and letting it learn from each trial's feedback.
pub fn drive(session: &mut Session, caregiver: &mut dyn Caregiver) -> Result<Vec<SessionEvent>, SessionError> {
    let mut trace = Vec::new();
    while !session.is_terminated() {
        let input = if session.phase() == SessionPhase::AwaitingObject {
            let word = session.current_word().unwrap_or_default().to_string();
            let need = session.expressed_need().expect("trial in progress");
            let ctx = ResponseContext {
                word: &word,
                expressed_need: need,
            };
            Some(caregiver.respond(ctx, session.caregiver_rng()))
        } else {
            None
        };
        let events = session.advance(input)?;
        if session.phase() == SessionPhase::Updated {
            let t = session.trials().last().expect("trial recorded");
            caregiver.learn(&t.word, t.offered_object, &t.feedback);
        }
        trace.extend(events);
    }
    Ok(trace)
}

/// Runs one simulated episode with the caregiver declared in `config`.
pub fn run_episode(config: &SessionConfig) -> Result<EpisodeLog, SessionError> {
    let cg = config
        .caregiver
        .as_ref()
        .ok_or_else(|| SessionError::ConfigInvalid("a simulated episode needs a caregiver".into()))?;
    let mut caregiver = SimCaregiver::new(cg.kind, cg.params);
    let mut log = run_episode_with(config.clone(), &mut caregiver)?;
    if let SimCaregiver::Associative(_) = caregiver {
        log.caregiver = Some(caregiver);
    }
    Ok(log)
}
