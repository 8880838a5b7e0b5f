use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::data::{hashgram_encode, DictEntry, FeatureStore};
use crate::error::{Error, Result};
use crate::math::Matrix;

use super::config::EncoderSpec;

/// A definition to encode. `id` is set when the text comes from a known
/// dictionary entry (or a translation of one).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub id: Option<String>,
    pub gloss: String,
}

impl Item {
    pub fn new(id: impl Into<String>, gloss: impl Into<String>) -> Self {
        Item {
            id: Some(id.into()),
            gloss: gloss.into(),
        }
    }

    pub fn text(gloss: impl Into<String>) -> Self {
        Item {
            id: None,
            gloss: gloss.into(),
        }
    }
}

impl From<&DictEntry> for Item {
    fn from(e: &DictEntry) -> Self {
        Item::new(e.id.clone(), e.gloss.clone())
    }
}

#[derive(Debug)]
enum Source {
    Store {
        store: FeatureStore,
        fallback_seed: u64,
    },
    Hashgram {
        seed: u64,
    },
}

/// Maps definition text to encoder features.
///
/// A store-backed encoder returns the stored row when the item's id is
/// known and its gloss matches the dictionary gloss for that id, then tries
/// an exact gloss match against all known entries, and otherwise falls back
/// to hash-gram features at the store's width.
#[derive(Debug)]
pub struct TextEncoder {
    name: String,
    dim: usize,
    source: Source,
    /// Known gloss for each stored id.
    gloss_of: HashMap<String, String>,
    /// First stored id carrying each gloss.
    id_of: HashMap<String, String>,
    fallbacks: AtomicUsize,
}

impl TextEncoder {
    pub fn hashgram(name: impl Into<String>, dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::InvalidArgument(format!(
                "hash-gram dim must be ≥ 8, got {dim}"
            )));
        }
        Ok(TextEncoder {
            name: name.into(),
            dim,
            source: Source::Hashgram { seed },
            gloss_of: HashMap::new(),
            id_of: HashMap::new(),
            fallbacks: AtomicUsize::new(0),
        })
    }

    /// Store-backed encoder. `known` supplies the glosses used to verify ids
    /// and to resolve exact-gloss hits; entries without a stored row are
    /// ignored.
    pub fn with_store<'a>(
        name: impl Into<String>,
        store: FeatureStore,
        fallback_seed: u64,
        known: impl IntoIterator<Item = &'a DictEntry>,
    ) -> Result<Self> {
        if store.dim() < 8 {
            return Err(Error::Data(format!(
                "feature store width {} is too small for the hash-gram fallback",
                store.dim()
            )));
        }
        let mut gloss_of = HashMap::new();
        let mut id_of = HashMap::new();
        for e in known {
            if !store.contains(&e.id) {
                continue;
            }
            gloss_of
                .entry(e.id.clone())
                .or_insert_with(|| e.gloss.clone());
            id_of.entry(e.gloss.clone()).or_insert_with(|| e.id.clone());
        }
        Ok(TextEncoder {
            name: name.into(),
            dim: store.dim(),
            source: Source::Store {
                store,
                fallback_seed,
            },
            gloss_of,
            id_of,
            fallbacks: AtomicUsize::new(0),
        })
    }

    /// Builds from a config entry, loading and merging feature files.
    pub fn from_spec<'a>(
        name: &str,
        spec: &EncoderSpec,
        known: impl IntoIterator<Item = &'a DictEntry>,
    ) -> Result<Self> {
        match spec {
            EncoderSpec::Hashgram { dim, seed } => TextEncoder::hashgram(name, *dim, *seed),
            EncoderSpec::Features {
                path,
                extra,
                fallback_seed,
            } => {
                let mut store = FeatureStore::load(path)?;
                for p in extra {
                    let more = FeatureStore::load(p)?;
                    if more.dim() != store.dim() {
                        return Err(Error::Data(format!(
                            "{} has width {}, {} has width {}",
                            p.display(),
                            more.dim(),
                            path.display(),
                            store.dim()
                        )));
                    }
                    for id in more.ids() {
                        let row = more.get(id).expect("listed id").to_vec();
                        store.insert(id.clone(), row)?;
                    }
                }
                TextEncoder::with_store(name, store, *fallback_seed, known)
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Features for an item without falling back to hashing, if any.
    pub fn known(&self, item: &Item) -> Option<Vec<f64>> {
        match &self.source {
            Source::Hashgram { seed } => Some(hashgram_encode(&item.gloss, self.dim, *seed)),
            Source::Store { store, .. } => {
                if let Some(id) = &item.id {
                    let verified = match self.gloss_of.get(id) {
                        Some(g) => *g == item.gloss,
                        None => false,
                    };
                    if verified {
                        return store.get(id).map(<[f64]>::to_vec);
                    }
                }
                self.id_of
                    .get(&item.gloss)
                    .and_then(|id| store.get(id))
                    .map(<[f64]>::to_vec)
            }
        }
    }

    /// Features for an item, hashing the gloss when nothing is stored.
    pub fn encode(&self, item: &Item) -> Vec<f64> {
        if let Some(v) = self.known(item) {
            return v;
        }
        self.fallbacks.fetch_add(1, Ordering::Relaxed);
        let seed = match &self.source {
            Source::Store { fallback_seed, .. } => *fallback_seed,
            Source::Hashgram { seed } => *seed,
        };
        hashgram_encode(&item.gloss, self.dim, seed)
    }

    pub fn encode_all(&self, items: &[Item]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(items.len() * self.dim);
        for it in items {
            data.extend(self.encode(it));
        }
        Matrix::from_vec(items.len(), self.dim, data)
    }

    /// Number of items encoded through the hash-gram fallback so far.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (FeatureStore, Vec<DictEntry>) {
        let mut s = FeatureStore::new(8);
        s.insert("a", vec![1.0; 8]).unwrap();
        s.insert("b", vec![2.0; 8]).unwrap();
        let known = vec![
            DictEntry::new("a", "alpha", "first"),
            DictEntry::new("b", "beta", "second"),
        ];
        (s, known)
    }

    #[test]
    fn resolution_order() {
        let (s, known) = store();
        let enc = TextEncoder::with_store("m", s, 3, &known).unwrap();
        assert_eq!(enc.encode(&Item::new("a", "first")), vec![1.0; 8]);
        // id known, gloss replaced: the stored row no longer describes it
        assert_eq!(enc.encode(&Item::new("a", "second")), vec![2.0; 8]);
        assert_eq!(enc.encode(&Item::text("second")), vec![2.0; 8]);
        assert_eq!(enc.fallback_count(), 0);
        let v = enc.encode(&Item::new("a", "something else"));
        assert_eq!(v, hashgram_encode("something else", 8, 3));
        assert_eq!(enc.fallback_count(), 1);
    }

    #[test]
    fn hashgram_encoder_never_falls_back() {
        let enc = TextEncoder::hashgram("h", 16, 9).unwrap();
        let m = enc
            .encode_all(&[Item::text("x y"), Item::new("q", "x y")])
            .unwrap();
        assert_eq!(m.row(0), m.row(1));
        assert_eq!(enc.fallback_count(), 0);
        assert!(TextEncoder::hashgram("h", 4, 0).is_err());
    }
}
