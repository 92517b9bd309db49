//! Shared inputs for the benchmarks.

use bpre_core::{EnvironmentLaw, Stream};
use rand::SeedableRng;

pub fn pareto() -> EnvironmentLaw {
    EnvironmentLaw::pareto(1.5, 0.5, 1.0).expect("valid law")
}

/// `len` increments of the default heavy-tailed law.
pub fn increments(len: usize, seed: u64) -> Vec<f64> {
    let law = pareto();
    let mut rng = Stream::seed_from_u64(seed);
    (0..len).map(|_| law.sample(&mut rng)).collect()
}
