//! Data-parallel width control.
//!
//! All grid loops go through rayon; `FINSLERFLOW_THREADS` caps the pool.

use std::sync::OnceLock;

use rayon::ThreadPool;

pub fn threads() -> usize {
    static N: OnceLock<usize> = OnceLock::new();
    *N.get_or_init(|| {
        std::env::var("FINSLERFLOW_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            })
    })
}

/// Run everything inline when the width is one; thread handoff on loaded
/// machines costs more than the work it hides.
pub fn serial() -> bool {
    threads() == 1
}

/// Process pool shared by all flow runs.
pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads())
            .build()
            .expect("thread pool")
    })
}
