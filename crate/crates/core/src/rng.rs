//! Per-episode random streams.
//!
//! Every episode owns one ChaCha key derived from its seed; each consumer
//! draws from its own stream of that key, so adding a consumer never shifts
//! the draws seen by the others.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Initial = 1,
    Observation = 2,
    Player1 = 3,
    Player2 = 4,
    Transition = 5,
    Selector = 6,
}

pub fn stream(seed: u64, label: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

/// Seed of episode `index` in a batch. Nearby base seeds give unrelated
/// batches.
pub fn episode_seed(base_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct EpisodeRng {
    pub initial: ChaCha8Rng,
    pub observation: ChaCha8Rng,
    pub player1: ChaCha8Rng,
    pub player2: ChaCha8Rng,
    pub transition: ChaCha8Rng,
    pub selector: ChaCha8Rng,
}

impl EpisodeRng {
    pub fn new(seed: u64) -> Self {
        Self {
            initial: stream(seed, Stream::Initial),
            observation: stream(seed, Stream::Observation),
            player1: stream(seed, Stream::Player1),
            player2: stream(seed, Stream::Player2),
            transition: stream(seed, Stream::Transition),
            selector: stream(seed, Stream::Selector),
        }
    }
}

/// Draws an index from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Draws from a sparse `(index, probability)` row.
pub fn sample_sparse<R: Rng + ?Sized>(row: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(q, p) in row {
        acc += p;
        if u < acc {
            return q;
        }
    }
    row.last().map_or(0, |&(q, _)| q)
}
