//! Seeded random substreams.
//!
//! Every random draw in a session comes from one master seed split into
//! named ChaCha streams, so adding draws to one component never shifts the
//! sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SessionRng = ChaCha8Rng;

/// Named substreams of the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Policy = 1,
    Feedback = 2,
    Caregiver = 3,
    Noise = 4,
    Ties = 5,
    Vocabulary = 6,
    Perception = 7,
    Bootstrap = 8,
}

pub fn substream(seed: u64, stream: Stream) -> SessionRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The full set of substreams owned by one session.
#[derive(Debug, Clone)]
pub struct Streams {
    pub policy: SessionRng,
    pub feedback: SessionRng,
    pub caregiver: SessionRng,
    pub noise: SessionRng,
    pub ties: SessionRng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self {
            policy: substream(seed, Stream::Policy),
            feedback: substream(seed, Stream::Feedback),
            caregiver: substream(seed, Stream::Caregiver),
            noise: substream(seed, Stream::Noise),
            ties: substream(seed, Stream::Ties),
        }
    }
}
