//! Thread-pool control. `ALIEN_UE_THREADS` caps the worker count; `1`
//! forces serial execution, which must give identical results.

use rayon::ThreadPool;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "ALIEN_UE_THREADS";

pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let threads = match threads {
        Some(t) => t,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count")))?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Runs `f` on a pool sized by `threads` or the environment.
pub fn install<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    Ok(thread_pool(threads)?.install(f))
}
