//! Deterministic random streams.
//!
//! Work is cut into fixed-size chunks and chunk `c` always draws from stream
//! `c` of a ChaCha generator keyed by the root seed, so results do not depend
//! on how many worker threads pick the chunks up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Draws per chunk.
pub const CHUNK_SIZE: usize = 4096;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Produces `n` values, chunk by chunk, in chunk order. `draw` receives the
/// chunk's generator, its index and the number of values it must return.
pub fn chunked<T, F>(n: usize, seed: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> Vec<T> + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK_SIZE.min(n - c * CHUNK_SIZE);
            let mut rng = substream(seed, c as u64);
            let out = draw(&mut rng, c, count);
            debug_assert_eq!(out.len(), count);
            out
        })
        .collect();
    parts.into_iter().flatten().collect()
}
