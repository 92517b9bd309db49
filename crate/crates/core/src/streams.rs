//! Deterministic random streams for replicated Monte Carlo runs.
//!
//! Every replica owns a ChaCha8 stream selected by `(master_seed, index)`, so
//! the merged result depends only on the seed and the replica count, never on
//! how the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

pub fn replica_stream(master_seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives a seed for an independent sub-experiment (e.g. the reference
/// sample of a comparison) from a master seed and a label.
pub fn sub_seed(master_seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed with the seed by splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master_seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splits `total` units of work over `replicas` streams and runs them in
/// parallel. Results come back in replica order.
pub fn replicate<T, F>(master_seed: u64, replicas: usize, total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream, u64) -> T + Sync,
{
    let replicas = replicas.max(1) as u64;
    let base = total / replicas;
    let extra = total % replicas;
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let share = base + u64::from(i < extra);
            let mut rng = replica_stream(master_seed, i);
            f(&mut rng, share)
        })
        .collect()
}
