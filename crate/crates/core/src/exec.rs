//! Deterministic work partitioning.
//!
//! Trial sweeps and Monte Carlo experiments are split into fixed-size blocks.
//! Each block derives its own RNG substream from the master seed and the block
//! index, so results are identical no matter how blocks are scheduled across
//! threads (or whether the `parallel` feature is enabled at all).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trials per scheduling block.
pub const BLOCK_SIZE: u64 = 4096;

/// How a partitionable computation is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    /// Parallel when the `parallel` feature is enabled, serial otherwise.
    #[default]
    Auto,
    /// Always single-threaded.
    Serial,
    /// Rayon data-parallel; falls back to serial without the feature.
    Parallel,
}

/// True when this build can actually run blocks in parallel.
pub fn parallelism_available() -> bool {
    cfg!(feature = "parallel")
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with stream labels into one substream seed.
pub fn mix_seed(seed: u64, labels: &[u64]) -> u64 {
    let mut state = seed ^ 0x6c07_8965_2873_91efu64;
    let mut out = splitmix64(&mut state);
    for &l in labels {
        state ^= l.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        out ^= splitmix64(&mut state);
    }
    out
}

/// A ChaCha substream keyed by `(seed, labels...)`.
pub fn substream(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    let key = mix_seed(seed, labels);
    let mut bytes = [0u8; 32];
    let mut state = key;
    for chunk in bytes.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

fn resolve(mode: ExecMode) -> bool {
    match mode {
        ExecMode::Serial => false,
        ExecMode::Auto | ExecMode::Parallel => parallelism_available(),
    }
}

/// Runs `work` on every block index in `0..blocks` and merges the results.
///
/// `merge` must be associative; block results are produced independently of
/// the schedule, so the reduction is deterministic.
pub fn map_reduce_blocks<R, W, M>(blocks: u64, mode: ExecMode, work: W, merge: M, identity: R) -> R
where
    R: Send + Sync + Clone,
    W: Fn(u64) -> R + Sync,
    M: Fn(R, R) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if resolve(mode) {
            use rayon::prelude::*;
            return (0..blocks)
                .into_par_iter()
                .map(&work)
                .reduce(|| identity.clone(), &merge);
        }
    }
    let _ = resolve(mode);
    (0..blocks).map(work).fold(identity, merge)
}

/// Splits `trials` into `(block_count, len_of_block)` pairs of `BLOCK_SIZE`.
pub fn block_count(trials: u64) -> u64 {
    trials.div_ceil(BLOCK_SIZE)
}

/// Number of trials inside block `index` when `trials` total are requested.
pub fn block_len(trials: u64, index: u64) -> u64 {
    let start = index * BLOCK_SIZE;
    BLOCK_SIZE.min(trials - start)
}
