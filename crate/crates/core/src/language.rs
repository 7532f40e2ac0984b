//! Babble vocabulary and the word/need bandit.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::homeostasis::{NeedKind, PerNeed};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LanguageError {
    #[error("cannot build {requested} distinct words from {available} syllable pairs")]
    CapacityExceeded { requested: usize, available: usize },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("unknown word {word:?} for need {need}")]
    UnknownPair { need: NeedKind, word: String },
    #[error("invalid syllable {0:?}: syllables are non-empty lowercase ASCII")]
    InvalidSyllable(String),
    #[error("duplicate word {0:?}")]
    DuplicateWord(String),
    #[error("{0}")]
    InvalidParameter(String),
}

/// A two-syllable babble word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[String; 2]", into = "[String; 2]")]
pub struct Word {
    syllables: [String; 2],
    text: String,
}

impl Word {
    pub fn new(first: &str, second: &str) -> Result<Self, LanguageError> {
        for s in [first, second] {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(LanguageError::InvalidSyllable(s.to_string()));
            }
        }
        Ok(Self {
            syllables: [first.to_string(), second.to_string()],
            text: format!("{first}{second}"),
        })
    }

    pub fn syllables(&self) -> (&str, &str) {
        (&self.syllables[0], &self.syllables[1])
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl TryFrom<[String; 2]> for Word {
    type Error = LanguageError;

    fn try_from([a, b]: [String; 2]) -> Result<Self, Self::Error> {
        Word::new(&a, &b)
    }
}

impl From<Word> for [String; 2] {
    fn from(w: Word) -> Self {
        w.syllables
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<Word>,
    syllables: Vec<String>,
}

impl Vocabulary {
    pub fn new(words: Vec<Word>, syllables: Vec<String>) -> Result<Self, LanguageError> {
        let mut texts: Vec<&str> = words.iter().map(Word::text).collect();
        texts.sort_unstable();
        if let Some(w) = texts.windows(2).find(|w| w[0] == w[1]) {
            return Err(LanguageError::DuplicateWord(w[0].to_string()));
        }
        Ok(Self { words, syllables })
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn syllables(&self) -> &[String] {
        &self.syllables
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, text: &str) -> Option<usize> {
        self.words.iter().position(|w| w.text() == text)
    }
}

fn syllable_pairs(syllables: &[String]) -> Result<Vec<Word>, LanguageError> {
    let mut pairs = Vec::with_capacity(syllables.len() * syllables.len());
    for a in syllables {
        for b in syllables {
            pairs.push(Word::new(a, b)?);
        }
    }
    Ok(pairs)
}

/// Samples `n_words` distinct two-syllable words from all ordered pairs of
/// `syllables`. Duplicate syllables are ignored.
pub fn build_vocabulary<R: Rng + ?Sized>(
    syllables: &[String],
    n_words: usize,
    rng: &mut R,
) -> Result<Vocabulary, LanguageError> {
    let mut unique: Vec<String> = Vec::new();
    for s in syllables {
        if !unique.contains(s) {
            unique.push(s.clone());
        }
    }
    let pairs = syllable_pairs(&unique)?;
    if n_words > pairs.len() {
        return Err(LanguageError::CapacityExceeded {
            requested: n_words,
            available: pairs.len(),
        });
    }
    let mut picked = index::sample(rng, pairs.len(), n_words).into_vec();
    picked.sort_unstable();
    let words = picked.into_iter().map(|i| pairs[i].clone()).collect();
    Vocabulary::new(words, unique)
}

/// Vocabulary construction parameters. `anchors` are always included first;
/// the remaining slots are sampled from the syllable pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabularyConfig {
    pub syllables: Vec<String>,
    pub n_words: usize,
    pub anchors: Vec<[String; 2]>,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        let s = |x: &str| x.to_string();
        Self {
            syllables: ["na", "wa", "da", "pa", "ba", "ma"].map(s).to_vec(),
            n_words: 6,
            anchors: vec![[s("na"), s("na")], [s("wa"), s("da")], [s("pa"), s("da")]],
        }
    }
}

impl VocabularyConfig {
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vocabulary, LanguageError> {
        let anchors = self
            .anchors
            .iter()
            .take(self.n_words)
            .map(|[a, b]| {
                if !self.syllables.contains(a) || !self.syllables.contains(b) {
                    return Err(LanguageError::InvalidSyllable(format!("{a}{b}")));
                }
                Word::new(a, b)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rest = self.n_words - anchors.len();
        let full = build_vocabulary(&self.syllables, self.syllables.len().pow(2), rng)?;
        let pool: Vec<Word> = full.words.into_iter().filter(|w| !anchors.contains(w)).collect();
        if rest > pool.len() {
            return Err(LanguageError::CapacityExceeded {
                requested: self.n_words,
                available: pool.len() + anchors.len(),
            });
        }
        let mut picked = index::sample(rng, pool.len(), rest).into_vec();
        picked.sort_unstable();
        let mut words = anchors;
        words.extend(picked.into_iter().map(|i| pool[i].clone()));
        Vocabulary::new(words, full.syllables)
    }
}

/// Reward delivered to the robot after each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Reward {
    Success,
    Failure,
}

impl Reward {
    pub fn value(self) -> i64 {
        match self {
            Reward::Success => 1,
            Reward::Failure => -1,
        }
    }

    pub fn from_outcome(success: bool) -> Self {
        if success {
            Reward::Success
        } else {
            Reward::Failure
        }
    }

    pub fn is_success(self) -> bool {
        self == Reward::Success
    }
}

impl TryFrom<i64> for Reward {
    type Error = String;

    fn try_from(v: i64) -> Result<Self, String> {
        match v {
            1 => Ok(Reward::Success),
            -1 => Ok(Reward::Failure),
            other => Err(format!("reward must be +1 or -1, got {other}")),
        }
    }
}

impl From<Reward> for i64 {
    fn from(r: Reward) -> i64 {
        r.value()
    }
}

/// Bandit value table: one row per need over the whole vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordNeedValues {
    vocabulary: Vocabulary,
    alpha: f64,
    q: PerNeed<Vec<f64>>,
    counts: PerNeed<Vec<u32>>,
}

impl WordNeedValues {
    pub fn new(vocabulary: Vocabulary, alpha: f64) -> Result<Self, LanguageError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(LanguageError::InvalidParameter(format!(
                "step size must be within (0, 1], got {alpha}"
            )));
        }
        let n = vocabulary.len();
        Ok(Self {
            vocabulary,
            alpha,
            q: PerNeed::splat(vec![0.0; n]),
            counts: PerNeed::splat(vec![0; n]),
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn values(&self, need: NeedKind) -> &[f64] {
        &self.q[need]
    }

    pub fn counts(&self, need: NeedKind) -> &[u32] {
        &self.counts[need]
    }

    pub fn value(&self, need: NeedKind, word: &str) -> Option<f64> {
        self.vocabulary.position(word).map(|i| self.q[need][i])
    }

    /// Overwrites a single value. Used to set up fixtures.
    pub fn set_value(&mut self, need: NeedKind, word: &str, v: f64) -> Result<(), LanguageError> {
        let i = self.index_of(need, word)?;
        self.q[need][i] = v;
        Ok(())
    }

    fn index_of(&self, need: NeedKind, word: &str) -> Result<usize, LanguageError> {
        self.vocabulary
            .position(word)
            .ok_or_else(|| LanguageError::UnknownPair {
                need,
                word: word.to_string(),
            })
    }

    /// `q += alpha * (r - q)` on the single (need, word) entry.
    pub fn update_value(&mut self, need: NeedKind, word: &str, reward: Reward) -> Result<f64, LanguageError> {
        let i = self.index_of(need, word)?;
        let q = &mut self.q[need][i];
        *q += self.alpha * (reward.value() as f64 - *q);
        self.counts[need][i] += 1;
        Ok(*q)
    }

    /// Words whose value equals the row maximum.
    pub fn greedy_words(&self, need: NeedKind) -> Vec<usize> {
        let row = &self.q[need];
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter()
            .enumerate()
            .filter(|(_, &v)| v == best)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn choose_word<R: Rng + ?Sized>(
        &self,
        need: NeedKind,
        policy: SelectionPolicy,
        rng: &mut R,
    ) -> Result<&Word, LanguageError> {
        let n = self.vocabulary.len();
        if n == 0 {
            return Err(LanguageError::EmptyVocabulary);
        }
        let i = match policy {
            SelectionPolicy::EpsilonGreedy { epsilon } => {
                if rng.random::<f64>() < epsilon {
                    rng.random_range(0..n)
                } else {
                    let best = self.greedy_words(need);
                    best[rng.random_range(0..best.len())]
                }
            }
            SelectionPolicy::Softmax { temperature } => {
                let row = &self.q[need];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = row.iter().map(|q| ((q - max) / temperature).exp()).collect();
                sample_weighted(&weights, rng)
            }
        };
        Ok(&self.vocabulary.words[i])
    }
}

/// Draws an index proportionally to non-negative `weights`.
pub(crate) fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    // rounding can leave x marginally above the last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionPolicy {
    EpsilonGreedy { epsilon: f64 },
    Softmax { temperature: f64 },
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<(), LanguageError> {
        match *self {
            SelectionPolicy::EpsilonGreedy { epsilon } if !(0.0..=1.0).contains(&epsilon) => Err(
                LanguageError::InvalidParameter(format!("epsilon must be within [0, 1], got {epsilon}")),
            ),
            SelectionPolicy::Softmax { temperature } if !(temperature > 0.0) => Err(
                LanguageError::InvalidParameter(format!("temperature must be positive, got {temperature}")),
            ),
            _ => Ok(()),
        }
    }
}

/// How the word-selection policy evolves with the number of times a need
/// has been expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySchedule {
    /// Epsilon-greedy with epsilon moving linearly from `start` to `end`
    /// over the first `expressions` expressions of each need.
    LinearEpsilon { start: f64, end: f64, expressions: u32 },
    Fixed { policy: SelectionPolicy },
}

impl Default for PolicySchedule {
    fn default() -> Self {
        PolicySchedule::LinearEpsilon {
            start: 1.0,
            end: 0.1,
            expressions: 6,
        }
    }
}

impl PolicySchedule {
    /// Policy for the expression with 0-based index `k` of one need.
    pub fn policy_at(&self, k: u32) -> SelectionPolicy {
        match *self {
            PolicySchedule::LinearEpsilon { start, end, expressions } => {
                let epsilon = if expressions <= 1 {
                    end
                } else {
                    let t = k.min(expressions - 1) as f64 / (expressions - 1) as f64;
                    start + (end - start) * t
                };
                SelectionPolicy::EpsilonGreedy { epsilon }
            }
            PolicySchedule::Fixed { policy } => policy,
        }
    }

    pub fn validate(&self) -> Result<(), LanguageError> {
        match *self {
            PolicySchedule::LinearEpsilon { start, end, .. } => {
                SelectionPolicy::EpsilonGreedy { epsilon: start }.validate()?;
                SelectionPolicy::EpsilonGreedy { epsilon: end }.validate()
            }
            PolicySchedule::Fixed { policy } => policy.validate(),
        }
    }
}
