//! Experiment drivers behind the `aircomp` command line tool.
//!
//! Every driver is a pure function of its spec: trials are seeded from
//! `(master seed, experiment, trial)` and rows come back in a fixed order, so
//! the emitted CSV does not depend on the worker count.

pub mod analog;
pub mod config;
pub mod error;
pub mod learning;
pub mod selftest;
pub mod stats;
pub mod sweep;
pub mod table;

pub use error::{Error, Result};

/// Run `f` on a dedicated pool of `threads` workers (0 picks the default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
