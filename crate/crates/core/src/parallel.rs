//! Thread-pool configuration for the parallel scans.

/// Environment variable capping internal parallelism.
pub const THREADS_ENV: &str = "ALLOCOPT_THREADS";

/// Thread count requested through [`THREADS_ENV`], if set to a positive integer.
pub fn requested_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Install the global rayon pool honouring [`THREADS_ENV`]. Calling it more
/// than once, or after the pool was already used, keeps the existing pool.
pub fn init_from_env() {
    if let Some(n) = requested_threads() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
