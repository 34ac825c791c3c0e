//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature the map runs on the rayon global pool;
//! without it, or through [`map_indexed_seq`], it is a plain loop. Output is
//! always in index order, so reductions over it are deterministic.

/// Map `f` over `0..len`, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(len, f)
}

/// Sequential reference path, always available.
pub fn map_indexed_seq<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Size the global worker pool. Returns `false` if it was already built or
/// the crate was compiled without the `parallel` feature.
pub fn configure_jobs(jobs: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        false
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
