use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent, reproducible random stream `stream` under a user seed.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream namespaces; keep them disjoint so no two consumers share draws.
pub(crate) const FOLD_STREAM: u64 = 1 << 32;
pub(crate) const GRID_STREAM: u64 = 2 << 32;
pub(crate) const SYNTH_STREAM: u64 = 3 << 32;
