//! Seeded random streams.
//!
//! Every randomized routine takes a single `u64` seed and draws from one or
//! more ChaCha8 streams derived from it. ChaCha is a counter-based generator:
//! `(seed, stream)` selects an independent keystream, so a routine can hand a
//! distinct stream to each sub-task without the sub-tasks perturbing each
//! other's draws. Stream identifiers are fixed per call site below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream identifiers, one per sampling site.
pub mod streams {
    pub const NORM_AXIOMS: u64 = 1;
    pub const C1_ESTIMATE: u64 = 2;
    pub const HS_PROOF: u64 = 3;
    pub const HSC_SCAN: u64 = 4;
    pub const SEGMENT_SEARCH: u64 = 5;
    pub const ISOMETRY_VALIDATION: u64 = 6;
    pub const PUSHFORWARD_PAIRS: u64 = 7;
    pub const PERTURB: u64 = 8;
    pub const RIGIDITY_DEMO: u64 = 9;
}

/// The generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn uniform_vec<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// A uniformly distributed unit vector in R^len.
pub(crate) fn unit_vec<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Log-uniform draw in `[lo, hi]`, both positive.
pub(crate) fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}
