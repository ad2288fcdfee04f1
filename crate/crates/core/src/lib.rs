//! Smart-meter privacy laboratory core.
//!
//! A household draws user load `X_t` from its appliances and reports grid
//! load `Y_t` to the utility. A rechargeable battery and a renewable source
//! sit in between, and an energy management policy decides `Y_t` each slot.
//! This crate holds everything that does not touch the filesystem:
//!
//! * [`model`]: traces, tariffs, battery dynamics, the simulation loop and
//!   the variance/cost evaluation of a run.
//! * [`policy`]: load-shaping policies, from convex target matching to
//!   stepping heuristics, memoryless channels and tabular MDP learning.
//! * [`info`]: information-theoretic privacy measures (privacy-power
//!   function, empirical mutual information, leakage bounds, detection
//!   exponents, Fisher information).
//! * [`smdm`]: data-manipulation primitives (gamma-difference noise,
//!   zero-sum masking, meter-count sizing, downsampling).
//! * [`attacks`]: adversaries used to score policies.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental math
//! goes through `libm`, so results are bit-identical across platforms.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attacks;
pub mod error;
pub mod info;
pub mod math;
pub mod model;
pub mod policy;
pub mod qp;
pub mod smdm;

pub use error::{Error, Result};

/// Seeded generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Builds an independent stream for `(seed, stream)`, e.g. one per meter or
/// per sweep point.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(stream);
    rng
}
