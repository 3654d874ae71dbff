//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) work is spread over the current rayon
//! pool; without it, or when the pool has a single thread, every helper runs as
//! a plain sequential iterator. Output order always follows input order, so
//! results do not depend on the execution mode.

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if rayon::current_num_threads() > 1 {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if rayon::current_num_threads() > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Runs `op` with at most `jobs` worker threads. `jobs == 0` means one per core.
pub fn with_jobs<R: Send>(jobs: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(op),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running sequentially");
                op()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        op()
    }
}

/// Whether this build can run work in parallel at all.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
