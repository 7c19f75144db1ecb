//! Shared randomness for the grand coupling.
//!
//! One merged Poisson stream of total rate `n` replaces `n` independent
//! rate-1 clocks: inter-arrival times are `Exp(n)` and each ring lands on a
//! uniformly chosen vertex. Every chain in a coupled group reads the same
//! `(time, vertex, uniform)` triple.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the generator recorded next to every seed.
pub const GENERATOR: &str = "ChaCha8Rng";

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable order-sensitive mix of several 64-bit words into one seed.
pub fn mix_seeds(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// A single clock ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEvent {
    pub time: f64,
    pub vertex: u32,
    pub uniform: f64,
}

#[derive(Debug, Clone)]
pub struct EventStream {
    seed: u64,
    n: usize,
    clock: f64,
    rng: ChaCha8Rng,
}

impl EventStream {
    pub fn new(seed: u64, n: usize) -> Self {
        assert!(n > 0, "event stream needs at least one vertex");
        EventStream { seed, n, clock: 0.0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent replica stream keyed by `(base_seed, replica_id)`.
    pub fn fork_replica(base_seed: u64, replica_id: u64, n: usize) -> Self {
        EventStream::new(mix_seeds(&[base_seed, replica_id]), n)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn next_event(&mut self) -> UpdateEvent {
        let u: f64 = self.rng.sample(Open01);
        let mut t = self.clock - u.ln() / self.n as f64;
        if t <= self.clock {
            t = self.clock.next_up();
        }
        self.clock = t;
        let vertex = self.rng.random_range(0..self.n as u32);
        let uniform: f64 = self.rng.random();
        UpdateEvent { time: t, vertex, uniform }
    }
}

impl Iterator for EventStream {
    type Item = UpdateEvent;

    fn next(&mut self) -> Option<UpdateEvent> {
        Some(self.next_event())
    }
}
