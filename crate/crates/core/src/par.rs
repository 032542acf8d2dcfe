//! Data-parallel helpers with a sequential fallback.
//!
//! Hot per-pixel and per-token loops run through these helpers so the crate
//! can be built either with rayon (`parallel` feature, on by default) or as
//! a fully sequential library. Both modes produce identical results: every
//! reduction used here is order-independent or performed on indexed output
//! slots.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Human-readable name of the compiled execution mode.
pub fn parallelism() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

/// Maps `0..n` through `f`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `0..n` through `f`, preserving index order in the output.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..n).map(f).collect()
}

/// Applies `f` to consecutive chunks of `data`, passing the chunk index.
///
/// Chunk boundaries are identical in both execution modes, so writes stay
/// deterministic.
#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Applies `f` to consecutive chunks of `data`, passing the chunk index.
#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}
