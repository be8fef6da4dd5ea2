//! Pluggable execution of independent work items.
//!
//! The core crate is single-threaded; callers with a thread pool implement
//! [`Executor`] and pass it to the `*_in` variants of the batch routines.
//! Results are always returned in index order, so reductions are
//! deterministic regardless of how the items were scheduled.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}
