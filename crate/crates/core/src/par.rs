//! Chunked data-parallel helpers.
//!
//! Work is split into fixed-size index chunks. Each chunk is processed
//! sequentially and the per-chunk results are returned in chunk order, so any
//! reduction the caller performs afterwards is bit-identical whether the
//! `parallel` feature is enabled or not, and independent of the thread count.

use std::ops::Range;

/// Number of indices handled by one task.
pub const CHUNK: usize = 4096;

fn chunk_ranges(len: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    (0..len.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(len))
}

/// Apply `f` to every chunk of `0..len`; results come back in chunk order.
#[cfg(feature = "parallel")]
pub fn map_chunks<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let ranges: Vec<Range<usize>> = chunk_ranges(len).collect();
    if ranges.len() <= 1 {
        return ranges.into_iter().map(f).collect();
    }
    ranges.into_par_iter().map(f).collect()
}

/// Apply `f` to every chunk of `0..len`; results come back in chunk order.
#[cfg(not(feature = "parallel"))]
pub fn map_chunks<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync + Send,
{
    chunk_ranges(len).map(f).collect()
}

/// Map over arbitrary items (subsets, lattice blocks, seeds) preserving order.
#[cfg(feature = "parallel")]
pub fn map_items<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map over arbitrary items (subsets, lattice blocks, seeds) preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_items<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Deterministic sum of `f(k)` over `0..len`.
pub fn sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(len, |r| r.map(&f).sum::<f64>())
        .into_iter()
        .sum()
}

/// Per-index map collected into a vector, in index order.
pub fn collect_indexed<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let mut out = Vec::with_capacity(len);
    for part in map_chunks(len, |r| r.map(&f).collect::<Vec<R>>()) {
        out.extend(part);
    }
    out
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Run `op` on a dedicated pool of `threads` workers (0 = rayon default).
/// Without the `parallel` feature this simply calls `op`.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

/// Run `op` on a dedicated pool of `threads` workers (0 = rayon default).
/// Without the `parallel` feature this simply calls `op`.
#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: usize, op: impl FnOnce() -> R + Send) -> R {
    op()
}
