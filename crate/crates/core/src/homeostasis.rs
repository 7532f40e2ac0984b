//! Homeostatic needs, drives and motivations.
//!
//! Each need is a level in `[0, 1]` that decays by a fixed amount per
//! interaction iteration and jumps back up when the matching object is
//! received. The drive is the deficit from the optimal level and the
//! motivation amplifies it by the perceived stimulus intensity:
//! `m = d + d * s`.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::perception::StimulusIntensity;

/// One of the robot's internal needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeedKind {
    Hunger,
    Thirst,
    Curiosity,
}

impl NeedKind {
    pub const ALL: [NeedKind; 3] = [NeedKind::Hunger, NeedKind::Thirst, NeedKind::Curiosity];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<NeedKind> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NeedKind::Hunger => "hunger",
            NeedKind::Thirst => "thirst",
            NeedKind::Curiosity => "curiosity",
        }
    }
}

impl fmt::Display for NeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value for each need, serialized with the need names as keys.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerNeed<T> {
    pub hunger: T,
    pub thirst: T,
    pub curiosity: T,
}

impl<T> PerNeed<T> {
    pub fn from_fn(mut f: impl FnMut(NeedKind) -> T) -> Self {
        Self {
            hunger: f(NeedKind::Hunger),
            thirst: f(NeedKind::Thirst),
            curiosity: f(NeedKind::Curiosity),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (NeedKind, &T)> {
        NeedKind::ALL.into_iter().map(move |n| (n, &self[n]))
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerNeed<U> {
        PerNeed::from_fn(|n| f(&self[n]))
    }
}

impl<T: Clone> PerNeed<T> {
    pub fn splat(value: T) -> Self {
        Self::from_fn(|_| value.clone())
    }
}

impl<T> Index<NeedKind> for PerNeed<T> {
    type Output = T;

    fn index(&self, need: NeedKind) -> &T {
        match need {
            NeedKind::Hunger => &self.hunger,
            NeedKind::Thirst => &self.thirst,
            NeedKind::Curiosity => &self.curiosity,
        }
    }
}

impl<T> IndexMut<NeedKind> for PerNeed<T> {
    fn index_mut(&mut self, need: NeedKind) -> &mut T {
        match need {
            NeedKind::Hunger => &mut self.hunger,
            NeedKind::Thirst => &mut self.thirst,
            NeedKind::Curiosity => &mut self.curiosity,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HomeostasisError {
    #[error("{field} for {need} must be within {range}, got {value}")]
    OutOfRange {
        field: &'static str,
        need: NeedKind,
        range: &'static str,
        value: f64,
    },
    #[error("expression threshold must be within (0, 2), got {0}")]
    InvalidThreshold(f64),
}

/// Per-need homeostatic variables. `1.0` means fully satiated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeostaticState {
    pub level: PerNeed<f64>,
    pub optimal: PerNeed<f64>,
    pub decay_rate: PerNeed<f64>,
    pub satiation_gain: PerNeed<f64>,
}

impl Default for HomeostaticState {
    fn default() -> Self {
        Self {
            level: PerNeed::splat(1.0),
            optimal: PerNeed::splat(1.0),
            decay_rate: PerNeed::splat(0.1),
            satiation_gain: PerNeed::splat(1.0),
        }
    }
}

impl HomeostaticState {
    pub fn new(
        level: PerNeed<f64>,
        optimal: PerNeed<f64>,
        decay_rate: PerNeed<f64>,
        satiation_gain: PerNeed<f64>,
    ) -> Result<Self, HomeostasisError> {
        let state = Self {
            level,
            optimal,
            decay_rate,
            satiation_gain,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), HomeostasisError> {
        for need in NeedKind::ALL {
            let checks: [(&'static str, f64, &'static str, bool); 4] = [
                ("level", self.level[need], "[0, 1]", (0.0..=1.0).contains(&self.level[need])),
                ("optimal", self.optimal[need], "[0, 1]", (0.0..=1.0).contains(&self.optimal[need])),
                ("decay_rate", self.decay_rate[need], "[0, inf)", self.decay_rate[need] >= 0.0),
                (
                    "satiation_gain",
                    self.satiation_gain[need],
                    "[0, inf)",
                    self.satiation_gain[need] >= 0.0,
                ),
            ];
            for (field, value, range, ok) in checks {
                if !ok || !value.is_finite() {
                    return Err(HomeostasisError::OutOfRange {
                        field,
                        need,
                        range,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    /// One iteration of decay on every need, floored at zero.
    pub fn decay_step(&self) -> Self {
        let mut next = self.clone();
        for need in NeedKind::ALL {
            next.level[need] = (self.level[need] - self.decay_rate[need]).max(0.0);
        }
        next
    }

    /// Restores `need` by its satiation gain, capped at one.
    pub fn satisfy(&self, need: NeedKind) -> Self {
        let mut next = self.clone();
        next.level[need] = (self.level[need] + self.satiation_gain[need]).min(1.0);
        next
    }

    pub fn compute_drive(&self, need: NeedKind) -> Drive {
        Drive {
            need,
            value: (self.optimal[need] - self.level[need]).max(0.0),
        }
    }

    pub fn drives(&self) -> PerNeed<Drive> {
        PerNeed::from_fn(|n| self.compute_drive(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub need: NeedKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motivation {
    pub need: NeedKind,
    pub value: f64,
}

/// `m = d + d * s`
pub fn compute_motivation(drive: Drive, stimulus: StimulusIntensity) -> Motivation {
    let d = drive.value;
    Motivation {
        need: drive.need,
        value: d + d * stimulus.value(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExpressionThreshold(f64);

impl ExpressionThreshold {
    pub fn new(theta: f64) -> Result<Self, HomeostasisError> {
        if theta > 0.0 && theta < 2.0 {
            Ok(Self(theta))
        } else {
            Err(HomeostasisError::InvalidThreshold(theta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for ExpressionThreshold {
    fn default() -> Self {
        Self(0.6)
    }
}

impl TryFrom<f64> for ExpressionThreshold {
    type Error = HomeostasisError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ExpressionThreshold> for f64 {
    fn from(t: ExpressionThreshold) -> f64 {
        t.0
    }
}

/// Picks the need to express: the strongest motivation at or above `theta`.
/// Exact ties are broken by a uniform draw from `rng`; no draw is made
/// otherwise.
pub fn select_expressed_need<R: Rng + ?Sized>(
    motivations: &[Motivation],
    theta: ExpressionThreshold,
    rng: &mut R,
) -> Option<NeedKind> {
    let best = motivations
        .iter()
        .filter(|m| m.value >= theta.value())
        .map(|m| m.value)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))?;
    let mut tied: Vec<NeedKind> = motivations
        .iter()
        .filter(|m| m.value == best)
        .map(|m| m.need)
        .collect();
    tied.sort();
    tied.dedup();
    match tied.len() {
        1 => Some(tied[0]),
        n => Some(tied[rng.random_range(0..n)]),
    }
}
