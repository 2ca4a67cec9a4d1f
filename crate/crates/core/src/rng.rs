//! Keyed, counter-addressable random streams.
//!
//! Every random quantity in a simulation is read from a ChaCha8 stream whose
//! key is `(seed, replication, domain, index)`. The `k`-th uniform of a stream
//! sits at a fixed word position, so a value never depends on how many other
//! values were generated before it. This is what makes windows extendable
//! without perturbing existing entries and lets mark sequences be re-read.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Independent families of random quantities inside one replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Domain {
    Sizes = 1,
    Marks = 2,
    States = 3,
    Regime = 4,
    Walk = 5,
    Auxiliary = 6,
}

/// Identifies one replication of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replication: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replication: u64) -> Self {
        Self { seed, replication }
    }

    /// Opens the stream for `(domain, index)`; `lane` selects one of 2^64
    /// independent sub-streams sharing that key (used for task revisits).
    pub fn stream(&self, domain: Domain, index: i64, lane: u64) -> RandomStream {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replication.to_le_bytes());
        key[16..24].copy_from_slice(&(domain as u64).to_le_bytes());
        key[24..32].copy_from_slice(&(index as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(lane);
        RandomStream { rng, drawn: 0 }
    }

    /// A key for an independent sub-experiment, e.g. one Monte Carlo sample
    /// that needs a whole window of its own.
    pub fn child(&self, index: u64) -> StreamKey {
        let mut s = self.stream(Domain::Auxiliary, index as i64, u64::MAX);
        StreamKey::new(s.rng.next_u64(), self.replication)
    }
}

/// A single-owner sequence of uniforms on the open interval (0, 1).
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    drawn: u64,
}

const TWO_POW_M53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * TWO_POW_M53
}

impl RandomStream {
    /// Next uniform in (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.drawn += 1;
        open_unit(self.rng.next_u64())
    }

    /// Number of uniforms consumed so far.
    pub fn position(&self) -> u64 {
        self.drawn
    }

    /// The `i`-th uniform (0-based) of this stream, independent of the cursor.
    pub fn uniform_at(&self, i: u64) -> f64 {
        let mut rng = self.rng.clone();
        // each u64 occupies two 32-bit words
        rng.set_word_pos(2 * i as u128);
        open_unit(rng.next_u64())
    }

    /// Moves the cursor so that the next call to [`uniform`](Self::uniform)
    /// returns the `i`-th value.
    pub fn seek(&mut self, i: u64) {
        self.rng.set_word_pos(2 * i as u128);
        self.drawn = i;
    }

    /// A standard normal variate (Box-Muller, consumes two uniforms).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential() {
        let key = StreamKey::new(7, 3);
        let mut s = key.stream(Domain::Marks, 42, 0);
        let seq: Vec<f64> = (0..20).map(|_| s.uniform()).collect();
        let fresh = key.stream(Domain::Marks, 42, 0);
        for (i, v) in seq.iter().enumerate() {
            assert_eq!(*v, fresh.uniform_at(i as u64));
        }
        let mut again = key.stream(Domain::Marks, 42, 0);
        again.seek(13);
        assert_eq!(again.uniform(), seq[13]);
    }

    #[test]
    fn keys_separate_streams() {
        let key = StreamKey::new(1, 0);
        let a = key.stream(Domain::Marks, 0, 0).uniform_at(0);
        let b = key.stream(Domain::Marks, 1, 0).uniform_at(0);
        let c = key.stream(Domain::Sizes, 0, 0).uniform_at(0);
        let d = key.stream(Domain::Marks, 0, 1).uniform_at(0);
        let e = StreamKey::new(1, 1).stream(Domain::Marks, 0, 0).uniform_at(0);
        let all = [a, b, c, d, e];
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn uniforms_are_open_unit() {
        let mut s = StreamKey::new(0, 0).stream(Domain::Auxiliary, -5, 0);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
