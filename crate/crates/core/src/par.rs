//! Execution policy for the data-parallel loops (samples, ensemble members,
//! evaluation points).
//!
//! With the `parallel` feature the loops run on a rayon pool; without it, or
//! with [`Exec::Sequential`], they run in order on the calling thread. Every
//! loop collects results in index order, so the output never depends on the
//! schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How an index-parallel map is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Run on a pool with the given number of workers (0 = rayon default).
    Parallel(usize),
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel(0)
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel(workers)
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Exec::Parallel(_))
    }

    /// Maps `f` over `0..n` and returns the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel(workers) => {
                let run = || (0..n).into_par_iter().with_max_len(1).map(&f).collect();
                if workers == 0 {
                    run()
                } else {
                    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                        Ok(pool) => pool.install(run),
                        Err(_) => (0..n).map(&f).collect(),
                    }
                }
            }
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel(_) => (0..n).map(f).collect(),
        }
    }

    /// Fallible map; the first error in index order wins.
    pub fn try_map<T, E, F>(&self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}
