//! Minimal scoped-thread helpers for the embarrassingly parallel loops
//! (elementwise field updates, per-cell accumulations with a fixed inner
//! order). Partitioning never changes results: every cell's arithmetic runs
//! in the same order regardless of the thread count, so outputs are
//! bit-identical for any `--threads` setting. Reductions to a single scalar
//! stay sequential elsewhere for the same reason.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Set the worker-thread budget (1 = everything inline).
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Split `data` into one contiguous chunk per worker and run `f(offset, chunk)`
/// on each. Chunks are disjoint, so `f` may write freely.
pub fn for_each_chunk_mut<T: Send, F>(data: &mut [T], min_chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync,
{
    let n = data.len();
    let workers = threads().min(n / min_chunk.max(1)).max(1);
    if workers == 1 {
        f(0, data);
        return;
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, part) in data.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || f(w * chunk, part));
        }
    });
}

/// Run `f(start, end)` over disjoint index ranges covering 0..n, one per
/// worker. For loops whose mutable state is indexed rather than sliced.
pub fn for_each_range<F>(n: usize, min_chunk: usize, f: F)
where
    F: Fn(usize, usize) + Sync,
{
    let workers = threads().min(n / min_chunk.max(1)).max(1);
    if workers == 1 {
        f(0, n);
        return;
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|scope| {
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let f = &f;
            scope.spawn(move || f(start, end));
            start = end;
        }
    });
}
