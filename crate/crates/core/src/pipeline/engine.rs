use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::TargetKind;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::projection::TrainedHead;
use crate::retrieval::{Hit, VocabIndex};

use super::encoder::{Item, TextEncoder};
use super::io::write_json;

/// Largest `k` accepted by [`Engine::lookup`].
pub const MAX_K: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestMember {
    pub name: String,
    pub encoder: String,
    /// Relative paths resolve against the manifest's directory.
    pub checkpoint: PathBuf,
}

/// The selected ensemble for one target space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleManifest {
    pub target: TargetKind,
    pub members: Vec<ManifestMember>,
    pub dev_cosine: f64,
}

impl EnsembleManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: EnsembleManifest = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.into(),
            reason: e.to_string(),
        })?;
        if m.members.is_empty() {
            return Err(Error::Corrupt {
                path: path.into(),
                reason: "no members".into(),
            });
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    /// Loads every member checkpoint.
    pub fn load_ensemble(&self, manifest_path: &Path) -> Result<Ensemble> {
        let base = manifest_path.parent().unwrap_or(Path::new(""));
        let heads = self
            .members
            .iter()
            .map(|m| {
                let head = TrainedHead::load(base.join(&m.checkpoint))?;
                if head.meta().encoder != m.encoder {
                    return Err(Error::Data(format!(
                        "member `{}` lists encoder `{}`, checkpoint was trained on `{}`",
                        m.name,
                        m.encoder,
                        head.meta().encoder
                    )));
                }
                Ok((m.name.clone(), head))
            })
            .collect::<Result<Vec<_>>>()?;
        let ens = Ensemble::new(heads)?;
        if ens.target() != self.target {
            return Err(Error::Data(format!(
                "manifest target {} disagrees with its heads ({})",
                self.target,
                ens.target()
            )));
        }
        Ok(ens)
    }
}

/// Encoders plus an ensemble: definition text in, predicted embeddings out.
/// Optionally carries a vocabulary index for lookups. Immutable once built,
/// so it can be shared freely across threads.
#[derive(Debug)]
pub struct Engine {
    ensemble: Ensemble,
    encoders: BTreeMap<String, Arc<TextEncoder>>,
    index: Option<VocabIndex>,
}

impl Engine {
    /// Every ensemble member's encoder must be present in `encoders`.
    pub fn new(
        ensemble: Ensemble,
        encoders: BTreeMap<String, Arc<TextEncoder>>,
        index: Option<VocabIndex>,
    ) -> Result<Self> {
        for (name, head) in ensemble.members() {
            let enc_name = &head.meta().encoder;
            let enc = encoders.get(enc_name).ok_or_else(|| {
                Error::Config(format!(
                    "member `{name}` needs encoder `{enc_name}`, which is not configured"
                ))
            })?;
            if enc.dim() != head.meta().d_enc {
                return Err(Error::shape(
                    "Engine::new",
                    format!("{} features for `{name}`", head.meta().d_enc),
                    enc.dim(),
                ));
            }
        }
        if let Some(ix) = &index {
            if ix.kind() != ensemble.target() || ix.dim() != ensemble.d_out() {
                return Err(Error::Data(format!(
                    "index holds {}-d {} vectors, ensemble predicts {}-d {}",
                    ix.dim(),
                    ix.kind(),
                    ensemble.d_out(),
                    ensemble.target()
                )));
            }
        }
        Ok(Engine {
            ensemble,
            encoders,
            index,
        })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn index(&self) -> Option<&VocabIndex> {
        self.index.as_ref()
    }

    pub fn target(&self) -> TargetKind {
        self.ensemble.target()
    }

    /// Ensemble-averaged predictions, one row per item.
    pub fn predict_items(&self, items: &[Item]) -> Result<Matrix> {
        if items.is_empty() {
            return Ok(Matrix::zeros(0, self.ensemble.d_out()));
        }
        // members sharing an encoder share one feature matrix
        let mut feats: BTreeMap<&str, Matrix> = BTreeMap::new();
        for (_, head) in self.ensemble.members() {
            let name = head.meta().encoder.as_str();
            if !feats.contains_key(name) {
                feats.insert(name, self.encoders[name].encode_all(items)?);
            }
        }
        let per_member: Vec<&Matrix> = self
            .ensemble
            .members()
            .iter()
            .map(|(_, h)| &feats[h.meta().encoder.as_str()])
            .collect();
        let out = self.ensemble.predict(&per_member)?;
        if !out.is_finite() {
            return Err(Error::NonFinite(
                "ensemble produced a non-finite prediction".into(),
            ));
        }
        Ok(out)
    }

    /// Encodes a free-text definition and returns the `k` nearest words.
    pub fn lookup(&self, definition: &str, k: usize) -> Result<Vec<Hit>> {
        if definition.trim().is_empty() {
            return Err(Error::InvalidArgument(
                "definition must not be empty".into(),
            ));
        }
        if k == 0 || k > MAX_K {
            return Err(Error::InvalidArgument(format!(
                "k must lie in 1..={MAX_K}, got {k}"
            )));
        }
        let index = self
            .index
            .as_ref()
            .ok_or_else(|| Error::State("engine has no vocabulary index".into()))?;
        let pred = self.predict_items(&[Item::text(definition)])?;
        index.lookup(pred.row(0), k)
    }

    /// Hash-gram fallbacks across all encoders so far.
    pub fn fallback_count(&self) -> usize {
        self.encoders.values().map(|e| e.fallback_count()).sum()
    }
}
