//! Rayon-backed [`Executor`] and thread-pool setup.

use rayon::prelude::*;
use score_forge_core::Executor;

use crate::error::HarnessError;

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "SCORE_FORGE_THREADS";

/// Runs items on the current rayon pool; results stay in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).into_par_iter().map(f).collect()
    }
}

/// Worker count: the explicit request, else the environment, else all cores.
pub fn resolve_threads(requested: Option<usize>) -> Result<usize, HarnessError> {
    let threads = match requested {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| HarnessError::Config {
                path: THREADS_ENV.into(),
                message: format!("not a thread count: {v:?}"),
            })?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if threads == 0 {
        return Err(HarnessError::Config {
            path: "threads".into(),
            message: "must be at least 1".into(),
        });
    }
    Ok(threads)
}

pub fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}
