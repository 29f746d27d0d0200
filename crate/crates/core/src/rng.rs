//! Seeded random number generation.
//!
//! Every stochastic routine in the crate takes an explicit `&mut Rng` so runs
//! are reproducible from a single `u64` seed.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

/// The crate's generator: ChaCha8 seeded from a 64-bit value.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a purpose tag.
pub fn derive(seed: u64, stream: u64) -> Rng {
    let mut r = Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Normal sample truncated to `[-2·std, 2·std]` by rejection.
pub fn trunc_normal(rng: &mut Rng, std: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let z: f64 = n.sample(rng);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

pub fn normal(rng: &mut Rng, std: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    let z: f64 = n.sample(rng);
    z * std
}
