//! Simulated caregivers.
//!
//! The associative caregiver keeps two routes from a heard word to an
//! object. The direct route `A[word, object]` is a delta-rule strength that
//! fades each trial (`retention`). The outcome route goes through the
//! positive feedback pair: `E[word, pair]` is how strongly the word predicts
//! a pair and `O[pair, object]` how strongly the pair points at an object.
//! The outcome route only carries word-specific information when feedback
//! pairs are tied to needs.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::feedback::FeedbackSignal;
use crate::homeostasis::NeedKind;
use crate::language::sample_weighted;
use crate::perception::ObjectKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaregiverKind {
    Oracle,
    Random,
    Associative,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("invalid caregiver parameter: {0}")]
pub struct CaregiverParamError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociativeParams {
    pub alpha_a: f64,
    pub alpha_e: f64,
    pub alpha_o: f64,
    pub lambda: f64,
    pub tau: f64,
    pub retention: f64,
}

impl Default for AssociativeParams {
    fn default() -> Self {
        Self {
            alpha_a: 0.3,
            alpha_e: 0.5,
            alpha_o: 0.5,
            lambda: 1.0,
            tau: 0.25,
            retention: 0.9,
        }
    }
}

impl AssociativeParams {
    pub fn validate(&self) -> Result<(), CaregiverParamError> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(CaregiverParamError(format!("{name} must be within (0, 1], got {v}")))
            }
        };
        unit("alpha_a", self.alpha_a)?;
        unit("alpha_e", self.alpha_e)?;
        unit("alpha_o", self.alpha_o)?;
        unit("retention", self.retention)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CaregiverParamError(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(CaregiverParamError(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Per-word strengths.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WordStrengths {
    /// Direct word to object, indexed by `ObjectKind`.
    pub direct: [f64; 3],
    /// Word to expected positive pair, indexed by `PositivePair`.
    pub expectancy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociativeState {
    pub params: AssociativeParams,
    pub words: BTreeMap<String, WordStrengths>,
    /// Pair to object, `outcome[pair][object]`.
    pub outcome: [[f64; 3]; 3],
}

impl AssociativeState {
    pub fn new(params: AssociativeParams) -> Self {
        Self {
            params,
            words: BTreeMap::new(),
            outcome: [[0.0; 3]; 3],
        }
    }

    pub fn strengths(&self, word: &str) -> WordStrengths {
        self.words.get(word).copied().unwrap_or_default()
    }

    /// `v(o) = A[w, o] + lambda * sum_f E[w, f] * O[f, o]`
    pub fn evidence(&self, word: &str) -> [f64; 3] {
        let s = self.strengths(word);
        let mut v = s.direct;
        for (o, vo) in v.iter_mut().enumerate() {
            let outcome: f64 = (0..3).map(|f| s.expectancy[f] * self.outcome[f][o]).sum();
            *vo += self.params.lambda * outcome;
        }
        v
    }

    /// The outcome-route term alone, without the lambda weight.
    pub fn outcome_evidence(&self, word: &str) -> [f64; 3] {
        let s = self.strengths(word);
        let mut v = [0.0; 3];
        for (o, vo) in v.iter_mut().enumerate() {
            *vo = (0..3).map(|f| s.expectancy[f] * self.outcome[f][o]).sum();
        }
        v
    }

    pub fn respond<R: Rng + ?Sized>(&self, word: &str, rng: &mut R) -> ObjectKind {
        let v = self.evidence(word);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = v.iter().map(|x| ((x - max) / self.params.tau).exp()).collect();
        ObjectKind::ALL[sample_weighted(&weights, rng)]
    }

    pub fn learn(&mut self, word: &str, chosen: ObjectKind, feedback: &FeedbackSignal) {
        let p = self.params;
        let r = if feedback.is_positive() { 1.0 } else { -1.0 };
        let entry = self.words.entry(word.to_string()).or_default();
        let a = &mut entry.direct[chosen.index()];
        *a += p.alpha_a * (r - *a);
        if let Some(pair) = feedback.positive_pair() {
            let e = &mut entry.expectancy[pair.index()];
            *e += p.alpha_e * (1.0 - *e);
            let o = &mut self.outcome[pair.index()][chosen.index()];
            *o += p.alpha_o * (1.0 - *o);
        }
        for s in self.words.values_mut() {
            for a in s.direct.iter_mut() {
                *a *= p.retention;
            }
        }
    }
}

/// What a caregiver can observe when choosing an object. `expressed_need`
/// is ground truth and is only read by the oracle.
#[derive(Debug, Clone, Copy)]
pub struct ResponseContext<'a> {
    pub word: &'a str,
    pub expressed_need: NeedKind,
}

/// A party that hands objects to the robot.
pub trait Caregiver {
    fn respond(&mut self, ctx: ResponseContext<'_>, rng: &mut dyn rand::RngCore) -> ObjectKind;

    fn learn(&mut self, word: &str, chosen: ObjectKind, feedback: &FeedbackSignal);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimCaregiver {
    /// Always hands the object for the expressed need. Test instrument only.
    Oracle,
    Random,
    Associative(AssociativeState),
}

impl SimCaregiver {
    pub fn new(kind: CaregiverKind, params: AssociativeParams) -> Self {
        match kind {
            CaregiverKind::Oracle => SimCaregiver::Oracle,
            CaregiverKind::Random => SimCaregiver::Random,
            CaregiverKind::Associative => SimCaregiver::Associative(AssociativeState::new(params)),
        }
    }

    pub fn kind(&self) -> CaregiverKind {
        match self {
            SimCaregiver::Oracle => CaregiverKind::Oracle,
            SimCaregiver::Random => CaregiverKind::Random,
            SimCaregiver::Associative(_) => CaregiverKind::Associative,
        }
    }
}

impl Caregiver for SimCaregiver {
    fn respond(&mut self, ctx: ResponseContext<'_>, rng: &mut dyn rand::RngCore) -> ObjectKind {
        match self {
            SimCaregiver::Oracle => ObjectKind::for_need(ctx.expressed_need),
            SimCaregiver::Random => ObjectKind::ALL[rng.random_range(0..3)],
            SimCaregiver::Associative(state) => state.respond(ctx.word, rng),
        }
    }

    fn learn(&mut self, word: &str, chosen: ObjectKind, feedback: &FeedbackSignal) {
        if let SimCaregiver::Associative(state) = self {
            state.learn(word, chosen, feedback);
        }
    }
}

/// Replays a fixed list of objects, one per trial.
#[derive(Debug, Clone)]
pub struct ScriptedCaregiver {
    script: Vec<ObjectKind>,
    next: usize,
}

impl ScriptedCaregiver {
    pub fn new(script: Vec<ObjectKind>) -> Self {
        Self { script, next: 0 }
    }
}

impl Caregiver for ScriptedCaregiver {
    fn respond(&mut self, _ctx: ResponseContext<'_>, _rng: &mut dyn rand::RngCore) -> ObjectKind {
        let o = self.script[self.next % self.script.len()];
        self.next += 1;
        o
    }

    fn learn(&mut self, _word: &str, _chosen: ObjectKind, _feedback: &FeedbackSignal) {}
}
