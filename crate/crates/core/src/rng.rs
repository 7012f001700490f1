//! Seedable random number generation with named independent streams.
//!
//! Every consumer of randomness (weight init, data shuffling, prior
//! sampling, encoder noise, input noise, evaluation) draws from its own
//! ChaCha stream, so toggling one consumer never perturbs the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Weights = 0,
    Data = 1,
    Prior = 2,
    EncoderNoise = 3,
    InputNoise = 4,
    Eval = 5,
}

/// One deterministic generator scoped to `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The full set of streams a training run owns.
pub struct RngStreams {
    pub weights: ChaCha8Rng,
    pub data: ChaCha8Rng,
    pub prior: ChaCha8Rng,
    pub encoder_noise: ChaCha8Rng,
    pub input_noise: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            weights: stream_rng(seed, Stream::Weights),
            data: stream_rng(seed, Stream::Data),
            prior: stream_rng(seed, Stream::Prior),
            encoder_noise: stream_rng(seed, Stream::EncoderNoise),
            input_noise: stream_rng(seed, Stream::InputNoise),
        }
    }
}
