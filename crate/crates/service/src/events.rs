use babble_core::feedback::{MotionToken, SoundToken, Valence};
use babble_core::{ObjectKind, Reward, SessionEvent, SessionPhase};
use serde::{Deserialize, Serialize};

/// Event as streamed to clients. Identical in shape for every condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientEvent {
    Phase { phase: SessionPhase },
    Babble { word: String },
    Evaluated { object: ObjectKind, reward: Reward },
    Feedback {
        valence: Valence,
        motion: MotionToken,
        sound: SoundToken,
        duration_ms: u64,
    },
    Progress { n: usize, max: usize },
    Terminated { converged: bool },
}

impl ClientEvent {
    pub fn from_session(e: SessionEvent, feedback_duration_ms: u64) -> Self {
        match e {
            SessionEvent::Phase { phase } => ClientEvent::Phase { phase },
            SessionEvent::Babble { word } => ClientEvent::Babble { word },
            SessionEvent::Evaluated { object, reward } => ClientEvent::Evaluated { object, reward },
            SessionEvent::Feedback { signal } => ClientEvent::Feedback {
                valence: signal.valence(),
                motion: signal.motion(),
                sound: signal.sound(),
                duration_ms: feedback_duration_ms,
            },
            SessionEvent::Progress { n, max } => ClientEvent::Progress { n, max },
            SessionEvent::Terminated { converged } => ClientEvent::Terminated { converged },
        }
    }
}

/// A client event with its 1-based position in the session's stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub index: u64,
    pub session_id: String,
    #[serde(flatten)]
    pub event: ClientEvent,
}
