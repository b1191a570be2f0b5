//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (on by default) these split work across a
//! rayon pool; without it they run sequentially. Every helper maps each
//! output slot to exactly one task with a fixed interior evaluation order,
//! so results are bitwise identical regardless of scheduling or thread
//! count. [`sequential`] forces the sequential path at runtime, which the
//! bench suite uses to compare both modes in a single run.

use std::cell::Cell;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with parallel dispatch disabled on the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    FORCE_SEQUENTIAL.with(|flag| {
        let prev = flag.replace(true);
        let out = f();
        flag.set(prev);
        out
    })
}

/// True when helpers on this thread will actually fan out.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(Cell::get)
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Maps `f` over an index range, preserving index order in the output.
pub fn map_range<R, F>(range: std::ops::Range<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return range.into_par_iter().map(f).collect();
    }
    range.map(f).collect()
}

/// Runs `f` over mutable row chunks of a row-major buffer.
///
/// `buf` holds rows of length `row_len`; chunk `c` covers rows
/// `[c * rows_per_chunk, ...)` and `f` receives the first row index of its
/// chunk. Each row is written by exactly one task.
pub fn for_each_row_chunk<F>(buf: &mut [f64], row_len: usize, rows_per_chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(row_len > 0 && rows_per_chunk > 0);
    assert_eq!(buf.len() % row_len, 0);
    let chunk_len = row_len * rows_per_chunk;
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        buf.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(c, chunk)| f(c * rows_per_chunk, chunk));
        return;
    }
    for (c, chunk) in buf.chunks_mut(chunk_len).enumerate() {
        f(c * rows_per_chunk, chunk);
    }
}
