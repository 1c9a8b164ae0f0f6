//! Deterministic pseudo-random numbers (SplitMix64).
//!
//! A tiny self-contained generator keeps randomized probes and test sampling
//! byte-reproducible across platforms from a single integer seed; no
//! statistical sophistication is needed here.

use alloc::vec;
use alloc::vec::Vec;

const GAMMA: u64 = 0x9e3779b97f4a7c15;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    /// Independent stream derived from (seed, stream id); used so that e.g.
    /// probe trial k draws the same noise regardless of trial order.
    pub fn stream(seed: u64, stream_id: u64) -> SplitMix64 {
        let mut s = SplitMix64::new(seed ^ mix(stream_id.wrapping_add(GAMMA)));
        s.next_u64();
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn uniform_vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for x in v.iter_mut() {
            *x = self.uniform(lo, hi);
        }
        v
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
