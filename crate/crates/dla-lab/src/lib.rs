//! Lattice Monte Carlo laboratory for diffusion-limited aggregation grown
//! from a line segment on Z², with exact harmonic-measure solvers, coupled
//! growth processes, and statistical verification tooling.

pub mod cli;
pub mod coupling;
pub mod error;
pub mod export;
pub mod growth;
pub mod harmonic;
pub mod index;
pub mod lattice;
pub mod rng;
pub mod solver;
pub mod squares;
pub mod stats;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Number of worker threads: DLA_LAB_THREADS, defaulting to all cores.
pub fn configured_threads() -> usize {
    std::env::var("DLA_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(num_threads)
}

fn num_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Build a rayon pool honoring DLA_LAB_THREADS and run `f` inside it.
pub fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(configured_threads())
        .build()
        .expect("thread pool");
    pool.install(f)
}
