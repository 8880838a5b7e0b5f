//! Operator layer: run configuration, text encoders, the ensemble engine
//! and the end-to-end commands behind the CLI.

mod commands;
mod config;
mod encoder;
mod engine;
mod io;

pub use commands::*;
pub use config::{AlignmentConfig, EncoderSpec, RunConfig, ServeConfig};
pub use encoder::{Item, TextEncoder};
pub use engine::{Engine, EnsembleManifest, ManifestMember, MAX_K};
pub use io::{
    read_predictions, read_translations, write_predictions, write_translations, Predictions,
};
