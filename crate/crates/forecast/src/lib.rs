//! Per-site prediction models and the seeded synthetic benchmark data.
//!
//! Models are small fully connected networks with hand-written forward and
//! backward passes, so gradient vectors arriving from the downstream
//! optimization layers chain directly into parameter updates without an
//! autodiff framework in between.

pub mod adam;
pub mod dataset;
mod error;
pub mod mlp;
pub mod model;
pub mod normalize;
pub mod synth;

pub use adam::AdamState;
pub use dataset::{load_features, pv_features, DayRecord, Dataset, LoadDay, Provenance, SiteDay};
pub use error::ForecastError;
pub use mlp::{clamp_prediction, mse_and_grad, Gradients, Mlp, Tape};
pub use model::PredictionModel;
pub use normalize::Normalizer;
pub use synth::{derive_reactive_kvar, generate_synthetic, SynthParams, POWER_FACTOR};
