//! A scoped thread pool for the batch stages.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use terminators_core::Executor;

pub const DEFAULT_WORKERS: usize = 4;

/// Runs items on up to `workers` threads. Results come back in input order.
#[derive(Debug, Clone, Copy)]
pub struct ThreadPool {
    workers: NonZeroUsize,
}

impl ThreadPool {
    pub fn new(workers: NonZeroUsize) -> Self {
        ThreadPool { workers }
    }

    pub fn workers(&self) -> usize {
        self.workers.get()
    }
}

impl Default for ThreadPool {
    fn default() -> Self {
        ThreadPool { workers: NonZeroUsize::new(DEFAULT_WORKERS).unwrap() }
    }
}

impl Executor for ThreadPool {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync,
    {
        let threads = self.workers.get().min(items.len());
        if threads <= 1 {
            return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(item) = items.get(i) else { break };
                    let r = f(i, item);
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every slot is filled"))
            .collect()
    }
}
