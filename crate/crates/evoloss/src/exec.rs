//! Indexed map over independent work items, sequential or data-parallel.
//!
//! Results are collected in input order, so the output is identical for
//! any scheduling — callers key their RNG lanes by item index, never by
//! thread. With the `parallel` feature disabled the same API runs on one
//! thread; with it enabled, `jobs` picks the degree.

/// Applies `f` to every item, returning results in input order.
///
/// `jobs` semantics: `0` uses every available core (the global pool),
/// `1` runs strictly sequentially on the calling thread, and `k ≥ 2`
/// runs on a dedicated pool of `k` threads. Without the `parallel`
/// feature every value of `jobs` runs sequentially.
#[cfg(feature = "parallel")]
pub fn indexed_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    use rayon::prelude::*;

    match jobs {
        1 => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        0 => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        k => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .expect("worker pool construction cannot fail for k >= 2");
            pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
        }
    }
}

/// Sequential fallback: identical signature and output order.
#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, U, F>(items: &[T], _jobs: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
