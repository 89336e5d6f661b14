use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs per-path work on a fixed-size pool and returns results in path order.
pub struct Executor {
    pool: ThreadPool,
    workers: usize,
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let workers = workers.max(1);
        let pool = ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// `f(0), f(1), …, f(n-1)`, computed in parallel, collected in index order.
    pub fn map_paths<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Send + Sync,
    {
        self.pool
            .install(|| (0..n as u64).into_par_iter().map(&f).collect())
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers).finish()
    }
}
