//! Deterministic seed derivation.
//!
//! Every stochastic stage draws from a ChaCha8 stream seeded through
//! [`derive`], so one master seed fixes the whole run and independent
//! stages (or parallel workers) get decorrelated streams regardless of
//! scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep per-stage seeds decorrelated even when the same master
/// seed reaches several stages.
pub mod stream {
    pub const SPLIT: u64 = 0x01;
    pub const SMOTE: u64 = 0x02;
    pub const SFA: u64 = 0x03;
    pub const GAUSSIAN: u64 = 0x04;
    pub const ICA: u64 = 0x05;
    pub const TREE: u64 = 0x06;
    pub const MLP: u64 = 0x07;
    pub const KFOLD: u64 = 0x08;
    pub const GRID: u64 = 0x09;
    pub const TRIAL: u64 = 0x0a;
    pub const REFIT: u64 = 0x0b;
    pub const FIT: u64 = 0x0c;
    pub const SYNTH: u64 = 0x0d;
}

/// SplitMix64 finalizer; full-period bijective mixer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream tag.
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ mix(tag))
}

/// Derive a child seed from a parent seed, a stream tag, and an index
/// (run number, tree number, row number).
pub fn derive_indexed(seed: u64, tag: u64, index: u64) -> u64 {
    mix(derive(seed, tag) ^ mix(index.wrapping_add(0x632be59bd9b4e019)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One N(0, 1) draw via Box-Muller. u1 is shifted into (0, 1] so the log
/// never sees zero.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
