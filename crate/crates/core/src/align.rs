//! Cross-lingual aligner: an autoencoder-shaped network mapping
//! source-language embeddings into the target-language space.
//!
//! ```text
//! encoder: Dense(d_in → m, relu) → Dense(m → bottleneck)
//! decoder: Dense(bottleneck → m, relu) → Dense(m → d_out)
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Arch};
use crate::data::{pair_matrices, AlignedPair};
use crate::error::{Error, Result};
use crate::math::{Activation, DenseLayer, FeedForwardStack, Matrix};
use crate::optim::TrainConfig;
use crate::projection::TrainedHead;
use crate::train::{self, Problem, Reconstruction, TrainingSummary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignerConfig {
    pub d_in: usize,
    /// Width of the intermediate layer on each side of the bottleneck.
    pub hidden: usize,
    pub bottleneck: usize,
    pub d_out: usize,
    pub seed: u64,
    /// Weight of an extra `MSE(output, input)` term; 0 disables it.
    pub reconstruction_weight: f64,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            d_in: 256,
            hidden: 128,
            bottleneck: 32,
            d_out: 256,
            seed: 0,
            reconstruction_weight: 0.0,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.d_in, self.hidden, self.bottleneck, self.d_out].contains(&0) {
            return Err(Error::InvalidArgument(
                "aligner dimensions must be ≥ 1".into(),
            ));
        }
        if self.reconstruction_weight != 0.0 && self.d_in != self.d_out {
            return Err(Error::InvalidArgument(
                "reconstruction loss needs d_in == d_out".into(),
            ));
        }
        Ok(())
    }

    /// Accepted-but-unusual settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.bottleneck >= self.hidden {
            w.push(format!(
                "bottleneck {} is not narrower than the intermediate width {}",
                self.bottleneck, self.hidden
            ));
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignerAE {
    stack: FeedForwardStack,
    pub config: AlignerConfig,
}

impl AlignerAE {
    pub fn init(config: AlignerConfig) -> Result<Self> {
        config.validate()?;
        for w in config.warnings() {
            log::warn!("aligner: {w}");
        }
        let c = &config;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let layers = vec![
            DenseLayer::glorot(c.d_in, c.hidden, Activation::Relu, &mut rng),
            DenseLayer::glorot(c.hidden, c.bottleneck, Activation::Identity, &mut rng),
            DenseLayer::glorot(c.bottleneck, c.hidden, Activation::Relu, &mut rng),
            DenseLayer::glorot(c.hidden, c.d_out, Activation::Identity, &mut rng),
        ];
        Ok(AlignerAE {
            stack: FeedForwardStack::new(layers)?,
            config,
        })
    }

    /// Wraps four explicit layers (relu, identity, relu, identity).
    pub fn from_layers(layers: Vec<DenseLayer>, seed: u64) -> Result<Self> {
        let stack = FeedForwardStack::new(layers)?;
        Self::from_stack(stack, seed, 0.0)
    }

    fn from_stack(stack: FeedForwardStack, seed: u64, reconstruction_weight: f64) -> Result<Self> {
        let acts: Vec<Activation> = stack.layers().iter().map(|l| l.activation).collect();
        use Activation::{Identity, Relu};
        if acts != [Relu, Identity, Relu, Identity] {
            return Err(Error::InvalidArgument(format!(
                "aligner layers must be relu/identity/relu/identity, got {acts:?}"
            )));
        }
        let l = stack.layers();
        let config = AlignerConfig {
            d_in: l[0].d_in(),
            hidden: l[0].d_out(),
            bottleneck: l[1].d_out(),
            d_out: l[3].d_out(),
            seed,
            reconstruction_weight,
        };
        if l[2].d_out() != config.hidden {
            return Err(Error::InvalidArgument(format!(
                "decoder width {} differs from encoder width {}",
                l[2].d_out(),
                config.hidden
            )));
        }
        Ok(AlignerAE { stack, config })
    }

    pub fn stack(&self) -> &FeedForwardStack {
        &self.stack
    }

    pub fn forward(&self, src: &Matrix) -> Result<Matrix> {
        self.stack.infer(src)
    }

    /// Bottleneck codes.
    pub fn encode(&self, src: &Matrix) -> Result<Matrix> {
        FeedForwardStack::new(self.stack.layers()[..2].to_vec())?.infer(src)
    }

    pub fn decode(&self, code: &Matrix) -> Result<Matrix> {
        FeedForwardStack::new(self.stack.layers()[2..].to_vec())?.infer(code)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAligner {
    pub aligner: AlignerAE,
    pub summary: TrainingSummary,
}

impl TrainedAligner {
    pub fn forward(&self, src: &Matrix) -> Result<Matrix> {
        self.aligner.forward(src)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(
            path.as_ref(),
            Arch::Aligner,
            &self.aligner.stack,
            &self.aligner.config,
            Some(&self.summary),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let loaded = checkpoint::load::<AlignerConfig>(path, Arch::Aligner)?;
        let corrupt = |reason: String| Error::Corrupt {
            path: path.into(),
            reason,
        };
        let aligner = AlignerAE::from_stack(
            loaded.stack,
            loaded.meta.seed,
            loaded.meta.reconstruction_weight,
        )
        .map_err(|e| corrupt(e.to_string()))?;
        if aligner.config != loaded.meta {
            return Err(corrupt("aligner metadata disagrees with layer dims".into()));
        }
        let summary = loaded
            .training
            .ok_or_else(|| corrupt("missing training summary".into()))?;
        Ok(TrainedAligner { aligner, summary })
    }
}

/// Trains on `(src → tgt)` pairs with the same loop contract as the
/// projection head: MSE, AdamW under one-cycle, best-dev-cosine snapshot.
pub fn train_aligner(
    aligner: AlignerAE,
    pairs_train: &[AlignedPair],
    pairs_dev: &[AlignedPair],
    cfg: &TrainConfig,
) -> Result<TrainedAligner> {
    if pairs_train.is_empty() || pairs_dev.is_empty() {
        return Err(Error::InvalidArgument(
            "aligner training needs nonempty train and dev pairs".into(),
        ));
    }
    let (tx, ty) = pair_matrices(pairs_train)?;
    let (dx, dy) = pair_matrices(pairs_dev)?;
    let config = aligner.config;
    let fitted = train::fit(
        aligner.stack,
        Problem {
            train_x: &tx,
            train_y: &ty,
            dev_x: &dx,
            dev_y: &dy,
        },
        cfg,
        Some(Reconstruction {
            weight: config.reconstruction_weight,
        }),
    )?;
    log::info!(
        "aligner: best dev cosine {:.4} at epoch {}",
        fitted.summary.best_dev_cosine,
        fitted.summary.best_epoch
    );
    Ok(TrainedAligner {
        aligner: AlignerAE {
            stack: fitted.stack,
            config,
        },
        summary: fitted.summary,
    })
}

/// Source-language head followed by the aligner.
#[derive(Debug, Clone)]
pub struct AlignmentPipeline {
    pub source_head: TrainedHead,
    pub aligner: TrainedAligner,
}

impl AlignmentPipeline {
    pub fn new(source_head: TrainedHead, aligner: TrainedAligner) -> Result<Self> {
        if source_head.meta().d_out != aligner.aligner.config.d_in {
            return Err(Error::shape(
                "AlignmentPipeline::new",
                format!("aligner input {}", aligner.aligner.config.d_in),
                source_head.meta().d_out,
            ));
        }
        Ok(AlignmentPipeline {
            source_head,
            aligner,
        })
    }

    /// `aligner(head(features))`.
    pub fn predict(&self, src_features: &Matrix) -> Result<Matrix> {
        let mid = self.source_head.predict(src_features)?;
        self.aligner.forward(&mid)
    }
}
