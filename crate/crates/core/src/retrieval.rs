//! Exact cosine top-k search over a word-embedding vocabulary.
//!
//! Rows are L2-normalized at build time, so scoring is a dot product.
//! Ordering is total: non-zero rows before zero rows, then score
//! descending, then id ascending.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DictEntry, DictionarySet, TargetKind};
use crate::error::{Error, Result};
use crate::math::{dot, norm, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub word: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabIndex {
    kind: TargetKind,
    dim: usize,
    ids: Vec<String>,
    words: Vec<String>,
    /// `V × dim`, unit rows or all-zero rows.
    rows: Vec<f64>,
    zero: Vec<bool>,
    /// Position of each row in ascending-id order; tie-break key.
    id_rank: Vec<u32>,
    by_id: HashMap<String, usize>,
}

const MAGIC: &[u8; 4] = b"RDIX";
const INDEX_VERSION: u32 = 1;

impl VocabIndex {
    /// Builds from `(id, word, embedding)` triples in order.
    pub fn from_vectors<'a, I>(kind: TargetKind, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a [f64])>,
    {
        let mut ids = Vec::new();
        let mut words = Vec::new();
        let mut rows = Vec::new();
        let mut zero = Vec::new();
        let mut by_id = HashMap::new();
        let mut dim = None;
        for (id, word, v) in items {
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(Error::Data(format!(
                    "embedding for `{id}` has dimension {}, index uses {d}",
                    v.len()
                )));
            }
            if by_id.insert(id.to_string(), ids.len()).is_some() {
                return Err(Error::Data(format!("duplicate id `{id}` in vocabulary")));
            }
            let n = norm(v);
            if !n.is_finite() {
                return Err(Error::NonFinite(format!("embedding for `{id}`")));
            }
            if n == 0.0 {
                rows.extend(std::iter::repeat_n(0.0, d));
                zero.push(true);
            } else {
                rows.extend(v.iter().map(|x| x / n));
                zero.push(false);
            }
            ids.push(id.to_string());
            words.push(word.to_string());
        }
        let dim = dim.ok_or_else(|| Error::Data(format!("no {kind} embeddings to index")))?;
        let masked = zero.iter().filter(|&&z| z).count();
        if masked > 0 {
            log::warn!("{masked} zero {kind} vectors masked in the vocabulary index");
        }
        Ok(Self::assemble(kind, dim, ids, words, rows, zero, by_id))
    }

    fn assemble(
        kind: TargetKind,
        dim: usize,
        ids: Vec<String>,
        words: Vec<String>,
        rows: Vec<f64>,
        zero: Vec<bool>,
        by_id: HashMap<String, usize>,
    ) -> Self {
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        let mut id_rank = vec![0u32; ids.len()];
        for (r, &i) in order.iter().enumerate() {
            id_rank[i] = r as u32;
        }
        VocabIndex {
            kind,
            dim,
            ids,
            words,
            rows,
            zero,
            id_rank,
            by_id,
        }
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    /// Normalized (or zero) row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.zero[i]
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::shape(
                "lookup",
                format!("query of dimension {}", self.dim),
                q.len(),
            ));
        }
        Ok(())
    }

    /// Cosine of the (unnormalized) query against every row.
    pub(crate) fn scores_into(&self, query: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let n = norm(query);
        if n == 0.0 || !n.is_finite() {
            out.resize(self.len(), 0.0);
            return;
        }
        let q: Vec<f64> = query.iter().map(|x| x / n).collect();
        out.extend(self.rows.chunks_exact(self.dim).map(|r| dot(&q, r)));
    }

    /// Calls `f(i, scores)` for each query row `i`, with the same scores
    /// [`scores_into`](Self::scores_into) would give. Queries are scored in
    /// blocks so each vocabulary row is read once per block.
    pub(crate) fn for_each_scored(&self, queries: &Matrix, mut f: impl FnMut(usize, &[f64])) {
        const BLOCK: usize = 8;
        let v = self.len();
        let mut units: Vec<Option<Vec<f64>>> = Vec::with_capacity(BLOCK);
        let mut scores: Vec<Vec<f64>> = (0..BLOCK).map(|_| vec![0.0; v]).collect();
        for start in (0..queries.rows()).step_by(BLOCK) {
            let end = (start + BLOCK).min(queries.rows());
            units.clear();
            units.extend((start..end).map(|i| {
                let q = queries.row(i);
                let n = norm(q);
                (n != 0.0 && n.is_finite()).then(|| q.iter().map(|x| x / n).collect())
            }));
            for (j, r) in self.rows.chunks_exact(self.dim).enumerate() {
                for (b, u) in units.iter().enumerate() {
                    scores[b][j] = u.as_deref().map_or(0.0, |q| dot(q, r));
                }
            }
            for (b, s) in scores[..end - start].iter().enumerate() {
                f(start + b, s);
            }
        }
    }

    #[inline]
    fn order(&self, scores: &[f64], a: usize, b: usize) -> Ordering {
        self.zero[a]
            .cmp(&self.zero[b])
            .then_with(|| scores[b].total_cmp(&scores[a]))
            .then_with(|| self.id_rank[a].cmp(&self.id_rank[b]))
    }

    pub(crate) fn top_k_from_scores(&self, scores: &[f64], k: usize) -> Vec<usize> {
        let mut cand: Vec<usize> = (0..self.len()).collect();
        let k = k.min(cand.len());
        if k == 0 {
            return Vec::new();
        }
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, |&a, &b| self.order(scores, a, b));
            cand.truncate(k);
        }
        cand.sort_unstable_by(|&a, &b| self.order(scores, a, b));
        cand
    }

    pub(crate) fn hits(&self, scores: &[f64], picked: Vec<usize>) -> Vec<Hit> {
        picked
            .into_iter()
            .map(|i| Hit {
                id: self.ids[i].clone(),
                word: self.words[i].clone(),
                score: scores[i],
            })
            .collect()
    }

    /// Exact top-`k` by cosine; `k > V` returns all `V` rows.
    pub fn lookup(&self, query: &[f64], k: usize) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be ≥ 1".into()));
        }
        self.check_query(query)?;
        let mut scores = Vec::with_capacity(self.len());
        self.scores_into(query, &mut scores);
        let picked = self.top_k_from_scores(&scores, k);
        Ok(self.hits(&scores, picked))
    }

    /// Row-wise [`lookup`](Self::lookup).
    pub fn batch_lookup(&self, queries: &Matrix, k: usize) -> Result<Vec<Vec<Hit>>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be ≥ 1".into()));
        }
        if queries.rows() == 0 {
            return Ok(Vec::new());
        }
        if queries.cols() != self.dim {
            return Err(Error::shape(
                "batch_lookup",
                format!("queries of dimension {}", self.dim),
                queries.cols(),
            ));
        }
        let mut out = Vec::with_capacity(queries.rows());
        self.for_each_scored(queries, |_, scores| {
            let picked = self.top_k_from_scores(scores, k);
            out.push(self.hits(scores, picked));
        });
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let put_str = |w: &mut BufWriter<File>, s: &str| -> std::io::Result<()> {
            w.write_all(&(s.len() as u32).to_le_bytes())?;
            w.write_all(s.as_bytes())
        };
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&INDEX_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.len() as u64).to_le_bytes())
            .map_err(io)?;
        w.write_all(&(self.dim as u64).to_le_bytes()).map_err(io)?;
        put_str(&mut w, self.kind.as_str()).map_err(io)?;
        for (id, word) in self.ids.iter().zip(&self.words) {
            put_str(&mut w, id).map_err(io)?;
            put_str(&mut w, word).map_err(io)?;
        }
        for v in &self.rows {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let corrupt = |reason: &str| Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        };
        let mut read = |buf: &mut [u8]| r.read_exact(buf).map_err(|_| corrupt("truncated index"));
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        read(&mut b4)?;
        if &b4 != MAGIC {
            return Err(corrupt("bad magic"));
        }
        read(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != INDEX_VERSION {
            return Err(Error::Version {
                path: path.into(),
                found: version,
                expected: INDEX_VERSION,
            });
        }
        read(&mut b8)?;
        let v = u64::from_le_bytes(b8) as usize;
        read(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        let get_str = |read: &mut dyn FnMut(&mut [u8]) -> Result<()>| -> Result<String> {
            let mut len = [0u8; 4];
            read(&mut len)?;
            let mut s = vec![0u8; u32::from_le_bytes(len) as usize];
            read(&mut s)?;
            String::from_utf8(s).map_err(|_| corrupt("invalid utf-8"))
        };
        let kind: TargetKind = get_str(&mut read)?.parse()?;
        let mut ids = Vec::with_capacity(v);
        let mut words = Vec::with_capacity(v);
        for _ in 0..v {
            ids.push(get_str(&mut read)?);
            words.push(get_str(&mut read)?);
        }
        let mut rows = Vec::with_capacity(v * dim);
        for _ in 0..v * dim {
            read(&mut b8)?;
            rows.push(f64::from_le_bytes(b8));
        }
        let zero = rows
            .chunks_exact(dim.max(1))
            .map(|row| row.iter().all(|&x| x == 0.0))
            .collect();
        let mut by_id = HashMap::with_capacity(v);
        for (i, id) in ids.iter().enumerate() {
            if by_id.insert(id.clone(), i).is_some() {
                return Err(corrupt("duplicate id"));
            }
        }
        Ok(Self::assemble(kind, dim, ids, words, rows, zero, by_id))
    }
}

/// Index over every entry of `set` carrying a `kind` embedding.
pub fn build_index(set: &DictionarySet, kind: TargetKind) -> Result<VocabIndex> {
    build_index_from(set.entries(), kind)
}

/// Index over entries from several sources; ids must be unique overall.
pub fn build_index_from<'a>(
    entries: impl IntoIterator<Item = &'a DictEntry>,
    kind: TargetKind,
) -> Result<VocabIndex> {
    VocabIndex::from_vectors(
        kind,
        entries
            .into_iter()
            .filter_map(|e| e.target(kind).map(|v| (e.id.as_str(), e.word.as_str(), v))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn entry(id: &str, v: &[f64]) -> DictEntry {
        let mut e = DictEntry::new(id, format!("w_{id}"), "");
        e.electra = Some(v.to_vec());
        e
    }

    fn small() -> VocabIndex {
        let set = DictionarySet::new(
            "ar",
            Split::Test,
            vec![
                entry("c", &[1.0, 0.0]),
                entry("a", &[0.0, 1.0]),
                entry("b", &[1.0, 1.0]),
                entry("z", &[0.0, 0.0]),
                entry("d", &[-1.0, 0.0]),
            ],
        )
        .unwrap();
        build_index(&set, TargetKind::Electra).unwrap()
    }

    #[test]
    fn exact_match_ranks_first() {
        let idx = small();
        let hits = idx.lookup(&[2.0, 0.0], 2).unwrap();
        assert_eq!(hits[0].id, "c");
        assert!((hits[0].score - 1.0).abs() < 1e-15);
        assert_eq!(hits[1].id, "b");
    }

    #[test]
    fn zero_rows_sort_last() {
        let idx = small();
        let hits = idx.lookup(&[1.0, 0.0], 10).unwrap();
        assert_eq!(hits.len(), 5);
        assert_eq!(hits.last().unwrap().id, "z");
        // `d` has cosine −1 yet still precedes the masked row.
        assert_eq!(hits[3].id, "d");
    }

    #[test]
    fn ties_break_by_id() {
        let idx = small();
        // [1,0] and [0,1] tie against [1,1]/√2.
        let hits = idx.lookup(&[1.0, 1.0], 3).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.id.as_str()).collect();
        assert_eq!(ids, vec!["b", "a", "c"]);
    }

    #[test]
    fn dimension_and_k_checked() {
        let idx = small();
        assert!(idx.lookup(&[1.0], 1).is_err());
        assert!(idx.lookup(&[1.0, 0.0], 0).is_err());
        assert!(idx
            .batch_lookup(&Matrix::zeros(0, 2), 3)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = entry("a", &[1.0]);
        let b = entry("a", &[2.0]);
        let err = build_index_from([&a, &b], TargetKind::Electra).unwrap_err();
        assert!(err.to_string().contains("`a`"));
    }

    #[test]
    fn no_embeddings_is_error() {
        let e = DictEntry::new("a", "w", "g");
        assert!(build_index_from([&e], TargetKind::Sgns).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let idx = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.idx");
        idx.save(&p).unwrap();
        let back = VocabIndex::load(&p).unwrap();
        assert_eq!(back, idx);

        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            VocabIndex::load(&p).unwrap_err(),
            Error::Corrupt { .. }
        ));
    }
}
