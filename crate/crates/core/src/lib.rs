//! A babbling robot that learns which words express its needs from the
//! objects a caregiver hands it, while the caregiver learns what the words
//! mean from the robot's feedback.
//!
//! The robot side combines homeostatic motivation ([`homeostasis`]), a
//! word/need bandit ([`language`]) and object recognition ([`perception`]).
//! Feedback after each trial ([`feedback`]) is either bound to the satisfied
//! need (differential outcomes) or drawn at random. [`caregiver`] provides
//! simulated caregivers, [`session`] the interaction loop, [`metrics`] the
//! moving average of rewards and [`harness`] batch experiments.

pub mod caregiver;
pub mod episode;
pub mod feedback;
pub mod harness;
pub mod homeostasis;
pub mod language;
pub mod metrics;
pub mod perception;
pub mod rng;
pub mod session;

pub use caregiver::{AssociativeParams, AssociativeState, Caregiver, CaregiverKind, SimCaregiver};
pub use episode::{EpisodeLog, SamRating, TrialRecord};
pub use feedback::{FeedbackCondition, FeedbackMap, FeedbackSignal, MotionToken, SoundToken, Valence};
pub use homeostasis::{HomeostaticState, NeedKind, PerNeed};
pub use language::{Reward, Word, WordNeedValues};
pub use metrics::{CurveAggregate, RewardSeries};
pub use perception::ObjectKind;
pub use session::{run_episode, Session, SessionConfig, SessionError, SessionEvent, SessionPhase};
