//! Experiment driver behind the `gppopf` binary.

pub mod artifacts;
pub mod config;
pub mod experiment;
pub mod models;
pub mod predict;

pub use config::{ExperimentConfig, GpSettings};
pub use experiment::{run_experiment, ExperimentReport, RunOutcome, Timings};
pub use predict::{predict_only, PredictOutcome};

/// `git describe` of the source tree at build time.
pub const BUILD_ID: &str = env!("GPPOPF_BUILD_ID");

/// Run `f` on a worker pool of `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            anyhow::bail!("--jobs must be at least 1");
        }
        b = b.num_threads(j);
    }
    Ok(b.build()?.install(f))
}
