//! Projection head: `Dense(d_enc → d_hidden, tanh) → Dense(d_hidden → d_out)`
//! regressing encoder features onto a target word-embedding space, plus its
//! training loop with best-dev-cosine checkpointing.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Arch};
use crate::data::{SupervisedSet, TargetKind};
use crate::error::{Error, Result};
use crate::math::{Activation, DenseLayer, FeedForwardStack, Matrix};
use crate::optim::TrainConfig;
use crate::train::{self, Problem, TrainingSummary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadMeta {
    pub target: TargetKind,
    /// Name of the feature store the head consumes.
    pub encoder: String,
    pub seed: u64,
    pub d_enc: usize,
    pub d_hidden: usize,
    pub d_out: usize,
}

/// Construction parameters for [`ProjectionHead::init`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadSpec {
    pub d_enc: usize,
    /// Defaults to `d_enc`.
    pub d_hidden: Option<usize>,
    pub d_out: usize,
    pub target: TargetKind,
    pub encoder: String,
    pub seed: u64,
}

impl HeadSpec {
    pub fn new(d_enc: usize, d_out: usize, target: TargetKind, encoder: impl Into<String>) -> Self {
        HeadSpec {
            d_enc,
            d_hidden: None,
            d_out,
            target,
            encoder: encoder.into(),
            seed: 0,
        }
    }

    pub fn hidden(mut self, d_hidden: usize) -> Self {
        self.d_hidden = Some(d_hidden);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    stack: FeedForwardStack,
    pub meta: HeadMeta,
}

impl ProjectionHead {
    /// Glorot-uniform weights, zero biases, fully determined by `spec.seed`.
    pub fn init(spec: &HeadSpec) -> Result<Self> {
        let d_hidden = spec.d_hidden.unwrap_or(spec.d_enc);
        if spec.d_enc == 0 || d_hidden == 0 || spec.d_out == 0 {
            return Err(Error::InvalidArgument("head dimensions must be ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let l1 = DenseLayer::glorot(spec.d_enc, d_hidden, Activation::Tanh, &mut rng);
        let l2 = DenseLayer::glorot(d_hidden, spec.d_out, Activation::Identity, &mut rng);
        Ok(ProjectionHead {
            stack: FeedForwardStack::new(vec![l1, l2])?,
            meta: HeadMeta {
                target: spec.target,
                encoder: spec.encoder.clone(),
                seed: spec.seed,
                d_enc: spec.d_enc,
                d_hidden,
                d_out: spec.d_out,
            },
        })
    }

    /// Wraps explicit layers, enforcing the tanh → identity shape.
    pub fn from_layers(
        hidden: DenseLayer,
        output: DenseLayer,
        target: TargetKind,
        encoder: impl Into<String>,
    ) -> Result<Self> {
        let meta = HeadMeta {
            target,
            encoder: encoder.into(),
            seed: 0,
            d_enc: hidden.d_in(),
            d_hidden: hidden.d_out(),
            d_out: output.d_out(),
        };
        Self::from_stack(FeedForwardStack::new(vec![hidden, output])?, meta)
    }

    fn from_stack(stack: FeedForwardStack, meta: HeadMeta) -> Result<Self> {
        let layers = stack.layers();
        let shape_ok = layers.len() == 2
            && layers[0].activation == Activation::Tanh
            && layers[1].activation == Activation::Identity;
        if !shape_ok {
            return Err(Error::InvalidArgument(
                "projection head must be Dense(tanh) followed by Dense(identity)".into(),
            ));
        }
        if (meta.d_enc, meta.d_hidden, meta.d_out)
            != (layers[0].d_in(), layers[0].d_out(), layers[1].d_out())
        {
            return Err(Error::InvalidArgument(
                "head metadata disagrees with layer dims".into(),
            ));
        }
        Ok(ProjectionHead { stack, meta })
    }

    pub fn stack(&self) -> &FeedForwardStack {
        &self.stack
    }

    pub fn d_enc(&self) -> usize {
        self.meta.d_enc
    }

    pub fn d_out(&self) -> usize {
        self.meta.d_out
    }

    /// Inference: one predicted embedding per feature row, order preserved.
    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        self.stack.infer(features)
    }
}

/// A head restored to its best dev epoch, with the training record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedHead {
    pub head: ProjectionHead,
    pub summary: TrainingSummary,
}

impl TrainedHead {
    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        self.head.predict(features)
    }

    pub fn meta(&self) -> &HeadMeta {
        &self.head.meta
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(
            path.as_ref(),
            Arch::Projection,
            &self.head.stack,
            &self.head.meta,
            Some(&self.summary),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let loaded = checkpoint::load::<HeadMeta>(path, Arch::Projection)?;
        let head =
            ProjectionHead::from_stack(loaded.stack, loaded.meta).map_err(|e| Error::Corrupt {
                path: path.into(),
                reason: e.to_string(),
            })?;
        let summary = loaded.training.ok_or_else(|| Error::Corrupt {
            path: path.into(),
            reason: "missing training summary".into(),
        })?;
        Ok(TrainedHead { head, summary })
    }
}

/// Trains `head` on `train`, evaluating mean dev cosine after each epoch and
/// keeping the weights of the first epoch that attains the maximum.
pub fn train_head(
    head: ProjectionHead,
    train: &SupervisedSet,
    dev: &SupervisedSet,
    cfg: &TrainConfig,
) -> Result<TrainedHead> {
    let meta = head.meta.clone();
    let fitted = train::fit(
        head.stack,
        Problem {
            train_x: &train.features,
            train_y: &train.targets,
            dev_x: &dev.features,
            dev_y: &dev.targets,
        },
        cfg,
        None,
    )?;
    log::info!(
        "head {}/{}: best dev cosine {:.4} at epoch {} ({} steps)",
        meta.encoder,
        meta.target,
        fitted.summary.best_dev_cosine,
        fitted.summary.best_epoch,
        fitted.summary.steps
    );
    Ok(TrainedHead {
        head: ProjectionHead {
            stack: fitted.stack,
            meta,
        },
        summary: fitted.summary,
    })
}
