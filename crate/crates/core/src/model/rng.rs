use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64 as Inner;

/// SplitMix64 stream (Steele, Lea & Flood) used for weight initialisation
/// and sampling.
///
/// `next_u64` is the reference SplitMix64 output. Derived draws:
/// - `next_unit_f64`: top 53 bits / 2^53, in [0, 1).
/// - `next_weight`: top 24 bits / 2^24 mapped affinely onto [-0.1, 0.1).
#[derive(Debug, Clone)]
pub struct SplitMix64(Inner);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(Inner::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn next_unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_weight(&mut self) -> f32 {
        let unit = (self.next_u64() >> 40) as f32 / (1u32 << 24) as f32;
        unit * 0.2 - 0.1
    }
}
