pub mod align;
pub mod checkpoint;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod math;
pub mod optim;
pub mod pipeline;
pub mod projection;
pub mod retrieval;
pub mod service;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
