//! Parallel/sequential dispatch for the data-parallel loops.
//!
//! With the `rayon` feature (default) batch work is spread over the global
//! rayon pool; without it every loop runs on the calling thread. Callers can
//! also pick [`Execution::Sequential`] at runtime, which is what the bench
//! suite uses to compare the two paths inside one binary.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "rayon")
    }
}

/// Map `f` over `0..n`, returning results in index order.
///
/// The output order never depends on scheduling, so reductions over the
/// returned vector are reproducible for any worker count.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "rayon")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Number of worker threads available to [`Execution::Parallel`].
pub fn worker_count() -> usize {
    #[cfg(feature = "rayon")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "rayon"))]
    {
        1
    }
}
