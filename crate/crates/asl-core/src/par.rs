//! Data-parallel map with a sequential fallback.
//!
//! Work items are independent by construction (per-item RNG streams, no
//! shared mutable state beyond value-deterministic caches), so the output is
//! a plain ordered collect: identical for 1 or N workers, with or without the
//! `parallel` feature.

/// Applies `f` to every item, returning results in input order.
///
/// `threads == 1` (or building without the `parallel` feature) runs
/// sequentially; `threads == 0` uses the default worker pool size.
pub fn map_ordered<T, U, F>(items: &[T], threads: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads != 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("worker pool");
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    let _ = threads;
    items.iter().map(f).collect()
}
