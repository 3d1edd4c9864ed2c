//! Seeded, stream-separated random number generation.
//!
//! All randomness in the crate flows through counter-based ChaCha generators
//! so that every (seed, purpose, index) triple yields an independent,
//! reproducible stream. Trials, problem generation, partition shuffles, and
//! power-method starts draw from disjoint stream ids, so adding draws to one
//! consumer never perturbs another.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::math;

/// Stream-id domains; one per independent consumer of randomness.
pub mod domain {
    /// Problem generators (matrix entries, planted solutions, noise).
    pub const GENERATOR: u64 = 1;
    /// Per-trial solver sampling streams.
    pub const TRIAL: u64 = 2;
    /// Power-method start vectors, indexed by batch.
    pub const POWER: u64 = 3;
    /// Random partition shuffles.
    pub const PARTITION: u64 = 4;
    /// Reference-minimizer internals.
    pub const REFERENCE: u64 = 5;
}

/// Number of low bits reserved for the within-domain index.
const INDEX_BITS: u32 = 48;

/// Generator for stream `index` of `domain`, rooted at `seed`.
///
/// Indices must fit in 48 bits; domains occupy the upper 16.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << INDEX_BITS));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << INDEX_BITS) | index);
    rng
}

/// Vector of independent standard normal draws.
pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// One standard-normal draw.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform random point on the unit sphere in `len` dimensions.
///
/// Normalized standard normal vector; redrawn in the (measure-zero) event of
/// a numerically zero draw.
pub fn unit_sphere_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let mut v = standard_normal_vec(rng, len);
        let norm = math::sqrt(math::norm_sq(&v));
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}
