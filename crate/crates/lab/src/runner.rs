//! Rayon-backed replica execution.

use rayon::prelude::*;
use snls_core::replica::ReplicaRunner;

use crate::error::{LabError, LabResult};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "SNLS_THREADS";

/// A private rayon pool. Results come back in replica order, so the thread
/// count never changes what is computed.
pub struct Pool {
    pool: rayon::ThreadPool,
    threads: usize,
}

impl Pool {
    pub fn new(threads: usize) -> LabResult<Self> {
        if threads == 0 {
            return Err(LabError::config("threads", "must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| LabError::Pool(e.to_string()))?;
        Ok(Self { pool, threads })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl ReplicaRunner for Pool {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count as u64).into_par_iter().map(&f).collect())
    }
}

/// `--threads`, else `SNLS_THREADS`, else the available parallelism.
pub fn resolve_threads(flag: Option<usize>) -> LabResult<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| LabError::config(THREADS_ENV, format!("{v:?} is not a thread count"))),
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}
