//! Audiovisual feedback tokens.
//!
//! On success the robot shows one of three positive motion/sound pairs. In
//! the differential-outcomes condition the pair is fixed per need; in the
//! control condition it is drawn independently of the need. Failure always
//! produces the same negative signal.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::homeostasis::NeedKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionToken {
    WagAntennae,
    ArmWave,
    NodHead,
    LookDownLowerAntennae,
}

impl MotionToken {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionToken::WagAntennae => "wag_antennae",
            MotionToken::ArmWave => "arm_wave",
            MotionToken::NodHead => "nod_head",
            MotionToken::LookDownLowerAntennae => "look_down_lower_antennae",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundToken {
    HappyBeepA,
    HappyBeepB,
    HappyBeepC,
    SadTone,
}

impl SoundToken {
    pub fn as_str(self) -> &'static str {
        match self {
            SoundToken::HappyBeepA => "happy_beep_a",
            SoundToken::HappyBeepB => "happy_beep_b",
            SoundToken::HappyBeepC => "happy_beep_c",
            SoundToken::SadTone => "sad_tone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Valence {
    Positive,
    Negative,
}

/// One of the three positive composite signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivePair {
    Antennae,
    Arm,
    Nod,
}

impl PositivePair {
    pub const ALL: [PositivePair; 3] = [PositivePair::Antennae, PositivePair::Arm, PositivePair::Nod];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tokens(self) -> (MotionToken, SoundToken) {
        match self {
            PositivePair::Antennae => (MotionToken::WagAntennae, SoundToken::HappyBeepA),
            PositivePair::Arm => (MotionToken::ArmWave, SoundToken::HappyBeepB),
            PositivePair::Nod => (MotionToken::NodHead, SoundToken::HappyBeepC),
        }
    }

    /// The pair a need is bound to under differential outcomes.
    pub fn for_need(need: NeedKind) -> Self {
        match need {
            NeedKind::Curiosity => PositivePair::Antennae,
            NeedKind::Hunger => PositivePair::Arm,
            NeedKind::Thirst => PositivePair::Nod,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSignal", into = "RawSignal")]
pub struct FeedbackSignal {
    valence: Valence,
    motion: MotionToken,
    sound: SoundToken,
}

#[derive(Serialize, Deserialize)]
struct RawSignal {
    valence: Valence,
    motion: MotionToken,
    sound: SoundToken,
}

impl TryFrom<RawSignal> for FeedbackSignal {
    type Error = String;

    fn try_from(raw: RawSignal) -> Result<Self, String> {
        let sig = FeedbackSignal {
            valence: raw.valence,
            motion: raw.motion,
            sound: raw.sound,
        };
        match raw.valence {
            Valence::Negative if sig == negative_feedback() => Ok(sig),
            Valence::Positive if sig.positive_pair().is_some() => Ok(sig),
            _ => Err(format!(
                "inconsistent feedback signal: {:?} with {} / {}",
                raw.valence,
                raw.motion.as_str(),
                raw.sound.as_str()
            )),
        }
    }
}

impl From<FeedbackSignal> for RawSignal {
    fn from(s: FeedbackSignal) -> Self {
        RawSignal {
            valence: s.valence,
            motion: s.motion,
            sound: s.sound,
        }
    }
}

impl FeedbackSignal {
    pub fn positive(pair: PositivePair) -> Self {
        let (motion, sound) = pair.tokens();
        Self {
            valence: Valence::Positive,
            motion,
            sound,
        }
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn motion(&self) -> MotionToken {
        self.motion
    }

    pub fn sound(&self) -> SoundToken {
        self.sound
    }

    pub fn is_positive(&self) -> bool {
        self.valence == Valence::Positive
    }

    pub fn positive_pair(&self) -> Option<PositivePair> {
        if self.valence != Valence::Positive {
            return None;
        }
        PositivePair::ALL
            .into_iter()
            .find(|p| p.tokens() == (self.motion, self.sound))
    }
}

pub fn negative_feedback() -> FeedbackSignal {
    FeedbackSignal {
        valence: Valence::Negative,
        motion: MotionToken::LookDownLowerAntennae,
        sound: SoundToken::SadTone,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeedbackCondition {
    #[serde(rename = "DOT")]
    Dot,
    #[serde(rename = "NonDOT")]
    NonDot,
}

impl FeedbackCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackCondition::Dot => "DOT",
            FeedbackCondition::NonDot => "NonDOT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "DOT" | "dot" => Some(FeedbackCondition::Dot),
            "NonDOT" | "nondot" | "non_dot" | "non-dot" => Some(FeedbackCondition::NonDot),
            _ => None,
        }
    }
}

impl std::fmt::Display for FeedbackCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ControlMode {
    PerTrial,
    /// A single need-to-pair permutation drawn once per session.
    FixedShuffle([PositivePair; 3]),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackMap {
    condition: FeedbackCondition,
    control: ControlMode,
}

impl FeedbackMap {
    pub fn new(condition: FeedbackCondition) -> Self {
        Self {
            condition,
            control: ControlMode::PerTrial,
        }
    }

    /// Control condition variant that shuffles the pairs once instead of
    /// drawing per trial. Has no effect in the DOT condition.
    pub fn with_fixed_shuffle<R: Rng + ?Sized>(condition: FeedbackCondition, rng: &mut R) -> Self {
        if condition == FeedbackCondition::Dot {
            return Self::new(condition);
        }
        let mut perm = PositivePair::ALL;
        perm.shuffle(rng);
        Self {
            condition,
            control: ControlMode::FixedShuffle(perm),
        }
    }

    pub fn condition(&self) -> FeedbackCondition {
        self.condition
    }

    pub fn positive_feedback<R: Rng + ?Sized>(&self, need: NeedKind, rng: &mut R) -> FeedbackSignal {
        let pair = match (self.condition, &self.control) {
            (FeedbackCondition::Dot, _) => PositivePair::for_need(need),
            (FeedbackCondition::NonDot, ControlMode::PerTrial) => PositivePair::ALL[rng.random_range(0..3)],
            (FeedbackCondition::NonDot, ControlMode::FixedShuffle(perm)) => perm[need.index()],
        };
        FeedbackSignal::positive(pair)
    }
}

/// Empirical mutual information in bits between paired discrete samples.
pub fn mutual_information_bits<A: Ord + Copy, B: Ord + Copy>(samples: &[(A, B)]) -> f64 {
    use std::collections::BTreeMap;
    let n = samples.len() as f64;
    if samples.is_empty() {
        return 0.0;
    }
    let mut joint: BTreeMap<(A, B), f64> = BTreeMap::new();
    let mut pa: BTreeMap<A, f64> = BTreeMap::new();
    let mut pb: BTreeMap<B, f64> = BTreeMap::new();
    for &(a, b) in samples {
        *joint.entry((a, b)).or_default() += 1.0;
        *pa.entry(a).or_default() += 1.0;
        *pb.entry(b).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pab = c / n;
            pab * (pab / ((pa[&a] / n) * (pb[&b] / n))).log2()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    #[test]
    fn dot_mapping_matches_need_bindings() {
        let map = FeedbackMap::new(FeedbackCondition::Dot);
        let mut rng = substream(0, Stream::Feedback);
        let hunger = map.positive_feedback(NeedKind::Hunger, &mut rng);
        assert_eq!((hunger.motion(), hunger.sound()), (MotionToken::ArmWave, SoundToken::HappyBeepB));
        let curiosity = map.positive_feedback(NeedKind::Curiosity, &mut rng);
        assert_eq!(
            (curiosity.motion(), curiosity.sound()),
            (MotionToken::WagAntennae, SoundToken::HappyBeepA)
        );
        let thirst = map.positive_feedback(NeedKind::Thirst, &mut rng);
        assert_eq!((thirst.motion(), thirst.sound()), (MotionToken::NodHead, SoundToken::HappyBeepC));
        assert!(hunger.is_positive());
    }

    #[test]
    fn control_pairs_are_uniform() {
        let map = FeedbackMap::new(FeedbackCondition::NonDot);
        let mut rng = substream(17, Stream::Feedback);
        let mut counts = [0usize; 3];
        for i in 0..3000 {
            let need = NeedKind::ALL[i % 3];
            let pair = map.positive_feedback(need, &mut rng).positive_pair().unwrap();
            counts[pair.index()] += 1;
        }
        // chi-square with 2 dof, 0.999 quantile 13.82
        let expected = 1000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.82, "chi2 {chi2}");
        for c in counts {
            assert!((c as f64 / 3000.0 - 1.0 / 3.0).abs() <= 0.03);
        }
    }

    #[test]
    fn negative_is_constant() {
        let a = negative_feedback();
        assert_eq!(a, negative_feedback());
        assert_eq!(a.valence(), Valence::Negative);
        assert_eq!(a.motion(), MotionToken::LookDownLowerAntennae);
        assert_eq!(a.sound(), SoundToken::SadTone);
        assert_eq!(a.positive_pair(), None);
    }

    #[test]
    fn token_strings() {
        let json = serde_json::to_string(&negative_feedback()).unwrap();
        assert_eq!(json, r#"{"valence":"negative","motion":"look_down_lower_antennae","sound":"sad_tone"}"#);
        for p in PositivePair::ALL {
            let (m, s) = p.tokens();
            assert_eq!(serde_json::to_value(m).unwrap(), m.as_str());
            assert_eq!(serde_json::to_value(s).unwrap(), s.as_str());
        }
        assert_eq!(serde_json::to_value(FeedbackCondition::NonDot).unwrap(), "NonDOT");
    }

    #[test]
    fn inconsistent_signals_do_not_parse() {
        let bad = r#"{"valence":"positive","motion":"look_down_lower_antennae","sound":"sad_tone"}"#;
        assert!(serde_json::from_str::<FeedbackSignal>(bad).is_err());
        let mixed = r#"{"valence":"positive","motion":"arm_wave","sound":"happy_beep_a"}"#;
        assert!(serde_json::from_str::<FeedbackSignal>(mixed).is_err());
    }

    #[test]
    fn fixed_shuffle_is_a_constant_permutation() {
        let map = FeedbackMap::with_fixed_shuffle(FeedbackCondition::NonDot, &mut substream(2, Stream::Feedback));
        let mut rng = substream(3, Stream::Feedback);
        let first: Vec<_> = NeedKind::ALL.iter().map(|&n| map.positive_feedback(n, &mut rng)).collect();
        for _ in 0..10 {
            let again: Vec<_> = NeedKind::ALL.iter().map(|&n| map.positive_feedback(n, &mut rng)).collect();
            assert_eq!(first, again);
        }
        let mut pairs: Vec<_> = first.iter().map(|s| s.positive_pair().unwrap()).collect();
        pairs.sort();
        assert_eq!(pairs, PositivePair::ALL.to_vec());
    }

    #[test]
    fn mutual_information_extremes() {
        let perfect: Vec<(u16, u16)> = (0..300).map(|i| (i % 3, i % 3)).collect();
        assert!((mutual_information_bits(&perfect) - 3f64.log2()).abs() < 1e-12);
        let indep: Vec<(u16, u16)> = (0..900).map(|i| (i % 3, (i / 3) % 3)).collect();
        assert!(mutual_information_bits(&indep).abs() < 1e-12);
    }
}
