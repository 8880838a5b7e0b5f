//! Dictionary datasets, encoder feature stores, bilingual mapped entries,
//! seeded splitting and the built-in hash-gram gloss encoder.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Which word-vector space a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Electra,
    Sgns,
}

impl TargetKind {
    pub const ALL: [TargetKind; 2] = [TargetKind::Electra, TargetKind::Sgns];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Electra => "electra",
            TargetKind::Sgns => "sgns",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "electra" => Ok(TargetKind::Electra),
            "sgns" => Ok(TargetKind::Sgns),
            other => Err(Error::InvalidArgument(format!(
                "unknown target kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// One dictionary item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DictEntry {
    pub id: String,
    pub word: String,
    pub gloss: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electra: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgns: Option<Vec<f64>>,
    /// Id of the cross-language counterpart (`enId` on disk).
    #[serde(rename = "enId", skip_serializing_if = "Option::is_none")]
    pub link_id: Option<String>,
}

impl DictEntry {
    pub fn new(id: impl Into<String>, word: impl Into<String>, gloss: impl Into<String>) -> Self {
        DictEntry {
            id: id.into(),
            word: word.into(),
            gloss: gloss.into(),
            pos: None,
            electra: None,
            sgns: None,
            link_id: None,
        }
    }

    pub fn target(&self, kind: TargetKind) -> Option<&[f64]> {
        match kind {
            TargetKind::Electra => self.electra.as_deref(),
            TargetKind::Sgns => self.sgns.as_deref(),
        }
    }
}

/// An ordered, id-unique collection of entries for one language and split.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionarySet {
    pub language: String,
    pub split: Split,
    entries: Vec<DictEntry>,
    by_id: HashMap<String, usize>,
}

impl DictionarySet {
    /// Validates id uniqueness and per-kind embedding dimensions.
    pub fn new(language: impl Into<String>, split: Split, entries: Vec<DictEntry>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(entries.len());
        let mut dims: [Option<usize>; 2] = [None, None];
        for (i, e) in entries.iter().enumerate() {
            if e.id.is_empty() {
                return Err(Error::Record {
                    index: i,
                    field: "id".into(),
                    reason: "empty id".into(),
                });
            }
            if by_id.insert(e.id.clone(), i).is_some() {
                return Err(Error::Record {
                    index: i,
                    field: "id".into(),
                    reason: format!("duplicate id `{}`", e.id),
                });
            }
            for (slot, kind) in TargetKind::ALL.iter().enumerate() {
                if let Some(v) = e.target(*kind) {
                    match dims[slot] {
                        None => dims[slot] = Some(v.len()),
                        Some(d) if d != v.len() => {
                            return Err(Error::Record {
                                index: i,
                                field: kind.as_str().into(),
                                reason: format!("dimension {} differs from earlier {d}", v.len()),
                            })
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(DictionarySet {
            language: language.into(),
            split,
            entries,
            by_id,
        })
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<DictEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DictEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Embedding dimension of `kind`, unknown until an entry carries one.
    pub fn dim(&self, kind: TargetKind) -> Option<usize> {
        self.entries
            .iter()
            .find_map(|e| e.target(kind).map(<[f64]>::len))
    }

    pub fn count_with(&self, kind: TargetKind) -> usize {
        self.entries
            .iter()
            .filter(|e| e.target(kind).is_some())
            .count()
    }
}

fn opt_string(obj: &Map<String, Value>, index: usize, field: &str) -> Result<Option<String>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(Error::Record {
            index,
            field: field.into(),
            reason: format!("expected a string, found {}", json_kind(other)),
        }),
    }
}

fn opt_vector(obj: &Map<String, Value>, index: usize, field: &str) -> Result<Option<Vec<f64>>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(k, v)| {
                v.as_f64().ok_or_else(|| Error::Record {
                    index,
                    field: field.into(),
                    reason: format!("element {k} is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(other) => Err(Error::Record {
            index,
            field: field.into(),
            reason: format!("expected an array of numbers, found {}", json_kind(other)),
        }),
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn as_object(v: &Value, index: usize) -> Result<&Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::Record {
        index,
        field: "<record>".into(),
        reason: format!("expected an object, found {}", json_kind(v)),
    })
}

fn parse_entry(v: &Value, index: usize) -> Result<DictEntry> {
    let obj = as_object(v, index)?;
    let id = opt_string(obj, index, "id")?.ok_or_else(|| Error::Record {
        index,
        field: "id".into(),
        reason: "missing".into(),
    })?;
    Ok(DictEntry {
        id,
        word: opt_string(obj, index, "word")?.unwrap_or_default(),
        gloss: opt_string(obj, index, "gloss")?.unwrap_or_default(),
        pos: opt_string(obj, index, "pos")?,
        electra: opt_vector(obj, index, "electra")?,
        sgns: opt_vector(obj, index, "sgns")?,
        link_id: opt_string(obj, index, "enId")?,
    })
}

fn read_json_array(path: &Path) -> Result<Vec<Value>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let value: Value =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Corrupt {
            path: path.into(),
            reason: e.to_string(),
        })?;
    match value {
        Value::Array(items) => Ok(items),
        other => Err(Error::Corrupt {
            path: path.into(),
            reason: format!(
                "expected a JSON array at top level, found {}",
                json_kind(&other)
            ),
        }),
    }
}

/// Parses dictionary records from an in-memory JSON array.
pub fn parse_dictionary(
    values: &[Value],
    language: impl Into<String>,
    split: Split,
) -> Result<DictionarySet> {
    let entries = values
        .iter()
        .enumerate()
        .map(|(i, v)| parse_entry(v, i))
        .collect::<Result<Vec<_>>>()?;
    DictionarySet::new(language, split, entries)
}

/// Loads a JSON-array dictionary file (`id`, `word`, `gloss`, `pos`,
/// `electra`, `sgns`, `enId`; all but `id` optional).
pub fn load_dictionary(
    path: impl AsRef<Path>,
    language: &str,
    split: Split,
) -> Result<DictionarySet> {
    let path = path.as_ref();
    let values = read_json_array(path)?;
    let set = parse_dictionary(&values, language, split)?;
    log::info!(
        "loaded {} {language}/{split} entries from {} (electra: {}, sgns: {})",
        set.len(),
        path.display(),
        set.count_with(TargetKind::Electra),
        set.count_with(TargetKind::Sgns),
    );
    Ok(set)
}

pub fn write_dictionary(set: &DictionarySet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, set.entries())?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Seeded shuffle, then the last `round(N · dev_fraction)` items go to dev.
pub fn split_set(
    set: &DictionarySet,
    dev_fraction: f64,
    seed: u64,
) -> Result<(DictionarySet, DictionarySet)> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dev_fraction must lie in (0, 1), got {dev_fraction}"
        )));
    }
    let n = set.len();
    let n_dev = (n as f64 * dev_fraction).round() as usize;
    if n_dev == 0 || n_dev >= n {
        return Err(Error::InvalidArgument(format!(
            "splitting {n} entries at {dev_fraction} leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| {
        idx.iter()
            .map(|&i| set.entries[i].clone())
            .collect::<Vec<_>>()
    };
    let train = DictionarySet::new(
        set.language.clone(),
        Split::Train,
        pick(&order[..n - n_dev]),
    )?;
    let dev = DictionarySet::new(set.language.clone(), Split::Dev, pick(&order[n - n_dev..]))?;
    Ok((train, dev))
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded FNV-1a followed by a SplitMix64 finalizer. Stable across
/// platforms and releases, unlike `std`'s default hasher.
pub fn stable_hash(bytes: &[u8], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Deterministic stand-in encoder: signed feature hashing of character
/// 2-, 3- and 4-grams of the whitespace-collapsed gloss (with `<`/`>`
/// boundary marks), L2-normalized. Empty glosses map to the zero vector.
pub fn hashgram_encode(gloss: &str, d_enc: usize, seed: u64) -> Vec<f64> {
    assert!(d_enc >= 8, "hashgram_encode: d_enc must be ≥ 8");
    let mut out = vec![0.0; d_enc];
    let words: Vec<&str> = gloss.split_whitespace().collect();
    if words.is_empty() {
        return out;
    }
    let text = format!("<{}>", words.join(" "));
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut buf = [0u8; 4];
    for n in 2..=4 {
        if chars.len() < n {
            continue;
        }
        for start in 0..=chars.len() - n {
            let from = chars[start].0;
            let last = chars[start + n - 1];
            let to = last.0 + last.1.encode_utf8(&mut buf).len();
            let h = stable_hash(&text.as_bytes()[from..to], seed);
            let slot = (h % d_enc as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            out[slot] += sign;
        }
    }
    let norm = crate::math::norm(&out);
    if norm > 0.0 {
        out.iter_mut().for_each(|v| *v /= norm);
    }
    out
}

/// Precomputed encoder representations keyed by entry id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    by_id: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct FeatureLine {
    id: String,
    features: Vec<f64>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            ids: Vec::new(),
            rows: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, features: Vec<f64>) -> Result<()> {
        let id = id.into();
        if features.len() != self.dim {
            return Err(Error::Data(format!(
                "feature record `{id}` has dimension {}, store expects {}",
                features.len(),
                self.dim
            )));
        }
        if self.by_id.contains_key(&id) {
            return Err(Error::Data(format!("duplicate feature record `{id}`")));
        }
        self.by_id.insert(id.clone(), self.rows.len());
        self.ids.push(id);
        self.rows.push(features);
        Ok(())
    }

    /// Encodes every entry gloss with [`hashgram_encode`].
    pub fn hashgram<'a>(
        entries: impl IntoIterator<Item = &'a DictEntry>,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut store = FeatureStore::new(dim);
        for e in entries {
            if !store.contains(&e.id) {
                store.insert(e.id.clone(), hashgram_encode(&e.gloss, dim, seed))?;
            }
        }
        Ok(store)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.by_id.get(id).map(|&i| self.rows[i].as_slice())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Reads line-delimited `{"id": ..., "features": [...]}` records. The
    /// store dimension is fixed by the first record.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut store: Option<FeatureStore> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FeatureLine = serde_json::from_str(&line).map_err(|e| Error::Line {
                path: path.into(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            let s = store.get_or_insert_with(|| FeatureStore::new(rec.features.len()));
            s.insert(rec.id, rec.features).map_err(|e| Error::Line {
                path: path.into(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        store.ok_or_else(|| Error::Data(format!("feature file {} is empty", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (id, row) in self.ids.iter().zip(&self.rows) {
            serde_json::to_writer(
                &mut w,
                &FeatureLine {
                    id: id.clone(),
                    features: row.clone(),
                },
            )?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One row of the bilingual mapped dictionary. Only target-language
/// embeddings are carried; source-side vectors come from a trained head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappedEntry {
    #[serde(rename = "arId")]
    pub tgt_id: String,
    #[serde(rename = "enId")]
    pub src_id: String,
    #[serde(rename = "arGloss")]
    pub tgt_gloss: String,
    #[serde(rename = "enGloss")]
    pub src_gloss: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electra: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgns: Option<Vec<f64>>,
}

impl MappedEntry {
    pub fn target(&self, kind: TargetKind) -> Option<&[f64]> {
        match kind {
            TargetKind::Electra => self.electra.as_deref(),
            TargetKind::Sgns => self.sgns.as_deref(),
        }
    }
}

/// Loads a mapped-dictionary JSON array
/// (`arId`, `enId`, `arGloss`, `enGloss`, `electra`, `sgns`).
pub fn load_mapped(path: impl AsRef<Path>) -> Result<Vec<MappedEntry>> {
    let path = path.as_ref();
    read_json_array(path)?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let obj = as_object(v, i)?;
            let required = |field: &str| {
                opt_string(obj, i, field)?.ok_or_else(|| Error::Record {
                    index: i,
                    field: field.into(),
                    reason: "missing".into(),
                })
            };
            Ok(MappedEntry {
                tgt_id: required("arId")?,
                src_id: required("enId")?,
                tgt_gloss: opt_string(obj, i, "arGloss")?.unwrap_or_default(),
                src_gloss: opt_string(obj, i, "enGloss")?.unwrap_or_default(),
                electra: opt_vector(obj, i, "electra")?,
                sgns: opt_vector(obj, i, "sgns")?,
            })
        })
        .collect()
}

pub fn write_mapped(entries: &[MappedEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, entries)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Source/target embedding pair for training an aligner.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub src_id: String,
    pub tgt_id: String,
    pub src_embedding: Vec<f64>,
    pub tgt_embedding: Vec<f64>,
}

/// Stacks pair embeddings into `(src, tgt)` matrices, checking dimensions.
pub fn pair_matrices(pairs: &[AlignedPair]) -> Result<(Matrix, Matrix)> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no aligned pairs".into()));
    }
    let src: Vec<&[f64]> = pairs.iter().map(|p| p.src_embedding.as_slice()).collect();
    let tgt: Vec<&[f64]> = pairs.iter().map(|p| p.tgt_embedding.as_slice()).collect();
    Ok((Matrix::from_rows(&src)?, Matrix::from_rows(&tgt)?))
}

/// Feature/target rows ready for regression.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSet {
    pub features: Matrix,
    pub targets: Matrix,
    pub ids: Vec<String>,
    /// Entries skipped for lacking a feature record or a target vector.
    pub dropped: usize,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Pairs each entry's features with its `target` embedding, in set order.
pub fn join(
    set: &DictionarySet,
    store: &FeatureStore,
    target: TargetKind,
) -> Result<SupervisedSet> {
    let mut feats = Vec::new();
    let mut tgts = Vec::new();
    let mut ids = Vec::new();
    let mut dropped = 0;
    for e in set.entries() {
        match (store.get(&e.id), e.target(target)) {
            (Some(f), Some(t)) => {
                feats.extend_from_slice(f);
                tgts.extend_from_slice(t);
                ids.push(e.id.clone());
            }
            _ => dropped += 1,
        }
    }
    if ids.is_empty() {
        return Err(Error::Data(format!(
            "no {}/{} entries have both features and a {target} vector",
            set.language, set.split
        )));
    }
    if dropped > 0 {
        log::warn!(
            "join {}/{} ({target}): dropped {dropped} entries lacking features or targets",
            set.language,
            set.split
        );
    }
    let n = ids.len();
    let d_out = tgts.len() / n;
    Ok(SupervisedSet {
        features: Matrix::from_vec(n, store.dim(), feats)?,
        targets: Matrix::from_vec(n, d_out, tgts)?,
        ids,
        dropped,
    })
}
