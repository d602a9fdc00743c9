//! Process-wide worker pool sized by `HSIGAN_THREADS` (unset or `0` = one
//! thread per core).

use std::sync::OnceLock;

pub const THREADS_ENV: &str = "HSIGAN_THREADS";

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
    })
}

/// Run `f` inside the shared pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    pool().install(f)
}

pub fn threads() -> usize {
    pool().current_num_threads()
}
