//! Shared worker pool. The size comes from `ASN_WORKERS` (default: all cores).

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const WORKERS_ENV: &str = "ASN_WORKERS";

pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        ThreadPoolBuilder::new()
            .num_threads(worker_count())
            .thread_name(|i| format!("asn-worker-{i}"))
            .build()
            .expect("worker pool")
    })
}
