//! Independent reference implementations for tests.
//!
//! Nothing in here calls into `windcond`. Each routine is the slow, obvious
//! version of something the library does quickly, so that tests can compare
//! the two.

pub mod arith;
pub mod deboor;
pub mod lp;
pub mod sample;
pub mod series;

pub use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for test fixtures.
pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
