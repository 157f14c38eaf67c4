//! Coordinated training of prediction models through the dispatch and
//! evaluation programs.
//!
//! The forward pass maps features through the site predictors into the
//! var-dispatch SOCP, then scores the resulting setpoints against ground
//! truth with the evaluation SOCP (losses plus weighted voltage violations).
//! The backward pass pulls the regulation-loss gradient through both conic
//! programs via their solution-map adjoints into every predictor, combines
//! it with the plain prediction-error gradient, and steps Adam.

pub mod chain;
pub mod cli;
pub mod config;
pub mod context;
pub mod evaluate;
pub mod report;
pub mod toy;
pub mod train;

pub use chain::{DayOutcomeSummary, ModelSet};
pub use config::{RunConfig, TrainConfig};
pub use context::RunContext;
pub use evaluate::{evaluate, mape, Evaluator};
pub use report::{CaseMetrics, EpochStats, MetricsReport};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("solver-failure budget exceeded: {skipped} of {total} training days skipped")]
    SolverBudget { skipped: usize, total: usize },
    #[error(transparent)]
    Grid(#[from] gridflow::GridError),
    #[error(transparent)]
    Forecast(#[from] forecast::ForecastError),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Deterministic generator keyed by (seed, purpose), so every random draw in
/// a run descends from one root seed.
pub fn rng_for(seed: u64, label: &str) -> rand_chacha::ChaCha12Rng {
    use rand::SeedableRng;
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    rand_chacha::ChaCha12Rng::from_seed(key)
}
