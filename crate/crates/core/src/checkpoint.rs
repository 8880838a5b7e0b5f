//! Versioned JSON container shared by projection heads and aligners.
//!
//! Layout: format tag, version, architecture tag, the layer list (dims,
//! activation, row-major weights, bias), model metadata, and the training
//! summary when the model was trained. Floats are written in shortest
//! round-trip form so weights survive a save/load cycle bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Activation, DenseLayer, FeedForwardStack, Matrix};
use crate::train::TrainingSummary;

pub const FORMAT_TAG: &str = "revdict-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Projection,
    Aligner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    d_in: usize,
    d_out: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Container<M> {
    format: String,
    version: u32,
    arch: Arch,
    layers: Vec<LayerRecord>,
    meta: M,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    training: Option<TrainingSummary>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    arch: Arch,
}

pub(crate) fn save<M: Serialize>(
    path: &Path,
    arch: Arch,
    stack: &FeedForwardStack,
    meta: &M,
    training: Option<&TrainingSummary>,
) -> Result<()> {
    let container = Container {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        arch,
        layers: stack
            .layers()
            .iter()
            .map(|l| LayerRecord {
                d_in: l.d_in(),
                d_out: l.d_out(),
                activation: l.activation,
                weights: l.weights.as_slice().to_vec(),
                bias: l.bias.clone(),
            })
            .collect(),
        meta,
        training: training.cloned(),
    };
    let bytes = serde_json::to_vec(&container)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) struct Loaded<M> {
    pub stack: FeedForwardStack,
    pub meta: M,
    pub training: Option<TrainingSummary>,
}

pub(crate) fn load<M: DeserializeOwned>(path: &Path, expected: Arch) -> Result<Loaded<M>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::Corrupt {
        path: path.into(),
        reason,
    };
    let header: Header = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
    if header.format != FORMAT_TAG {
        return Err(corrupt(format!("unknown format tag `{}`", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    if header.arch != expected {
        return Err(corrupt(format!(
            "checkpoint holds a {:?} model, expected {:?}",
            header.arch, expected
        )));
    }
    let c: Container<M> = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
    let layers = c
        .layers
        .into_iter()
        .map(|l| {
            let w = Matrix::from_vec(l.d_out, l.d_in, l.weights)?;
            DenseLayer::new(w, l.bias, l.activation)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| corrupt(e.to_string()))?;
    let stack = FeedForwardStack::new(layers).map_err(|e| corrupt(e.to_string()))?;
    if stack.layers().iter().any(|l| !l.weights.is_finite()) {
        return Err(corrupt("non-finite weights".into()));
    }
    Ok(Loaded {
        stack,
        meta: c.meta,
        training: c.training,
    })
}
