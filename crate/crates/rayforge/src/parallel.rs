//! Thread-pool plumbing. The `RAYFORGE_THREADS` environment variable caps
//! worker count; all parallel operations in this crate produce output that
//! is independent of the worker count, so the cap only affects speed.

/// Parse `RAYFORGE_THREADS` (positive integer). Invalid or unset → None.
pub fn env_thread_cap() -> Option<usize> {
    std::env::var("RAYFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

/// Run `f` under a rayon pool of `threads` workers (global pool when None).
/// Without the `parallel` feature this just calls `f`.
#[cfg(feature = "parallel")]
pub fn with_thread_cap<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_thread_cap<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}
