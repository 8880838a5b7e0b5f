//! Small synthetic corpora with a known structure, for demos, smoke tests
//! and benchmarks.
//!
//! Each entry gets a random multi-word gloss. A latent vector `z` is the
//! hash-gram encoding of that gloss, and both target embeddings are fixed
//! random linear maps of `z` plus noise, so the targets are learnable from
//! the text. Four feature stores of varying quality stand in for encoder
//! CLS outputs. Source-language glosses translate the target glosses word
//! by word, and source embeddings are the target embeddings under a random
//! rotation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::data::{
    hashgram_encode, write_dictionary, write_mapped, DictEntry, DictionarySet, FeatureStore,
    MappedEntry, Split, TargetKind,
};
use crate::error::{Error, Result};
use crate::math::{normalized, Matrix};
use crate::pipeline::write_translations;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Width of the latent gloss encoding and of every feature store.
    pub d_enc: usize,
    pub d_electra: usize,
    pub d_sgns: usize,
    /// Standard deviation of the noise added to target vectors.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_train: 600,
            n_dev: 150,
            n_test: 150,
            d_enc: 32,
            d_electra: 16,
            d_sgns: 12,
            noise: 0.01,
            seed: 7,
        }
    }
}

/// Hash-gram seed defining the latent gloss encoding.
pub const LATENT_SEED: u64 = 11;

/// Encoder names, best first.
pub const ENCODERS: [&str; 4] = ["camel", "arabert", "marbert", "mbert"];

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub train: DictionarySet,
    pub dev: DictionarySet,
    pub test: DictionarySet,
    pub features: BTreeMap<String, FeatureStore>,
    /// Features for source-language entries, as a multilingual encoder
    /// would produce: the latent code of the meaning plus noise.
    pub source_features: FeatureStore,
    /// Source-language dictionary; its `sgns` vectors live in their own
    /// space related to the target space by a rotation.
    pub source: DictionarySet,
    pub mapped_train: Vec<MappedEntry>,
    pub mapped_dev: Vec<MappedEntry>,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn apply(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter_rows()
        .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Random orthogonal matrix by Gram–Schmidt on a Gaussian matrix.
fn rotation(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let g = gaussian_matrix(rng, d, d, 1.0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    for row in g.iter_rows() {
        let mut v = row.to_vec();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        basis.push(normalized(&v));
    }
    Matrix::from_rows(&basis).expect("square")
}

fn lexicon(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    const ONSETS: [&str; 14] = [
        "b", "d", "f", "k", "l", "m", "n", "q", "r", "s", "sh", "t", "w", "z",
    ];
    const VOWELS: [&str; 6] = ["a", "i", "u", "aa", "ii", "uu"];
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| {
                format!(
                    "{}{}",
                    ONSETS.choose(rng).unwrap(),
                    VOWELS.choose(rng).unwrap()
                )
            })
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

impl SynthCorpus {
    pub fn generate(spec: SynthSpec) -> Result<Self> {
        if spec.d_enc < 8 || spec.n_train == 0 || spec.n_dev == 0 || spec.n_test == 0 {
            return Err(Error::InvalidArgument(
                "synthetic corpus needs d_enc ≥ 8 and nonempty splits".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n = spec.n_train + spec.n_dev + spec.n_test;
        let words = lexicon(&mut rng, 600 + 2 * n);
        let (vocab_tgt, rest) = words.split_at(300);
        let (vocab_src, heads) = rest.split_at(300);
        let scale = 1.0 / (spec.d_enc as f64).sqrt();
        let to_electra = gaussian_matrix(&mut rng, spec.d_electra, spec.d_enc, scale * 3.0);
        let to_sgns = gaussian_matrix(&mut rng, spec.d_sgns, spec.d_enc, scale * 3.0);
        let src_to_tgt = rotation(&mut rng, spec.d_sgns);
        let mix = gaussian_matrix(&mut rng, spec.d_enc, spec.d_enc, scale);

        // a gloss is a word-index sequence rendered in either language
        let gloss = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            let len = rng.gen_range(3..=7);
            (0..len)
                .map(|_| rng.gen_range(0..vocab_tgt.len()))
                .collect()
        };
        let render = |vocab: &[String], idx: &[usize]| {
            idx.iter()
                .map(|&i| vocab[i].as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let noisy = |rng: &mut ChaCha8Rng, v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .map(|x| x + spec.noise * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };

        let mut entries = Vec::with_capacity(n);
        let mut source = Vec::with_capacity(n);
        let mut mapped = Vec::with_capacity(n);
        let mut source_features = FeatureStore::new(spec.d_enc);
        let mut stores: BTreeMap<String, FeatureStore> = ENCODERS
            .iter()
            .map(|e| (e.to_string(), FeatureStore::new(spec.d_enc)))
            .collect();
        for i in 0..n {
            let words = gloss(&mut rng);
            let g = render(vocab_tgt, &words);
            let z = hashgram_encode(&g, spec.d_enc, LATENT_SEED);
            let mut e = DictEntry::new(format!("ar.{i:05}"), heads[i].clone(), g.clone());
            e.electra = Some(noisy(&mut rng, apply(&to_electra, &z)));
            let sgns = noisy(&mut rng, apply(&to_sgns, &z));
            e.sgns = Some(sgns.clone());

            // the source gloss translates the target gloss word by word; its
            // embedding is the target vector rotated into the source space
            let src_gloss = render(vocab_src, &words);
            let mut s = DictEntry::new(
                format!("en.{i:05}"),
                heads[n + i].clone(),
                src_gloss.clone(),
            );
            let tgt_in_src: Vec<f64> = (0..spec.d_sgns)
                .map(|c| {
                    (0..spec.d_sgns)
                        .map(|r| src_to_tgt.get(r, c) * sgns[r])
                        .sum()
                })
                .collect();
            s.sgns = Some(tgt_in_src);
            source_features.insert(s.id.clone(), noisy(&mut rng, z.clone()))?;
            e.link_id = Some(s.id.clone());
            mapped.push(MappedEntry {
                tgt_id: e.id.clone(),
                src_id: s.id.clone(),
                tgt_gloss: g.clone(),
                src_gloss,
                electra: None,
                sgns: Some(sgns),
            });

            let other = hashgram_encode(&g, spec.d_enc, LATENT_SEED + 1);
            let mixed = apply(&mix, &z);
            let jitter = |rng: &mut ChaCha8Rng, v: Vec<f64>| -> Vec<f64> {
                v.into_iter()
                    .map(|x| x + 0.04 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            };
            let rows: [Vec<f64>; 4] = [
                jitter(&mut rng, z.clone()),
                jitter(
                    &mut rng,
                    z.iter()
                        .zip(&mixed)
                        .map(|(a, b)| 0.8 * a + 0.2 * b)
                        .collect(),
                ),
                z.iter()
                    .zip(&other)
                    .map(|(a, b)| 0.5 * a + 0.5 * b)
                    .collect(),
                other,
            ];
            for (name, row) in ENCODERS.iter().zip(rows) {
                stores.get_mut(*name).unwrap().insert(e.id.clone(), row)?;
            }
            entries.push(e);
            source.push(s);
        }
        let test = entries.split_off(spec.n_train + spec.n_dev);
        let dev = entries.split_off(spec.n_train);
        // source rows mirror the target split sizes; mapped rows follow
        let mapped_dev = mapped[spec.n_train..spec.n_train + spec.n_dev].to_vec();
        mapped.truncate(spec.n_train);
        Ok(SynthCorpus {
            train: DictionarySet::new("ar", Split::Train, entries)?,
            dev: DictionarySet::new("ar", Split::Dev, dev)?,
            test: DictionarySet::new("ar", Split::Test, test)?,
            features: stores,
            source_features,
            source: DictionarySet::new("en", Split::Train, source)?,
            mapped_train: mapped,
            mapped_dev,
            spec,
        })
    }

    /// Test glosses keyed by id, as a translations file would carry them.
    pub fn identity_translations(&self) -> Vec<(String, String)> {
        self.test
            .entries()
            .iter()
            .map(|e| (e.id.clone(), e.gloss.clone()))
            .collect()
    }

    /// Writes every artifact plus a `config.json` under `dir` and returns
    /// the config path. Training uses peak learning rate `max_lr`.
    pub fn write(&self, dir: &Path, max_lr: f64) -> Result<PathBuf> {
        let mk = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mk(&dir.join("features"))?;
        write_dictionary(&self.train, dir.join("train.json"))?;
        write_dictionary(&self.dev, dir.join("dev.json"))?;
        write_dictionary(&self.test, dir.join("test.json"))?;
        write_dictionary(&self.source, dir.join("en_train.json"))?;
        write_mapped(&self.mapped_train, dir.join("mapped_train.json"))?;
        write_mapped(&self.mapped_dev, dir.join("mapped_dev.json"))?;
        write_translations(
            dir.join("test.translated.jsonl"),
            &self.identity_translations(),
        )?;
        let mut encoders = serde_json::Map::new();
        for (name, store) in &self.features {
            let rel = format!("features/{name}.jsonl");
            store.save(dir.join(&rel))?;
            encoders.insert(
                name.clone(),
                json!({ "features": { "path": rel, "fallback_seed": LATENT_SEED } }),
            );
        }
        self.source_features
            .save(dir.join("features/source.jsonl"))?;
        let d = self.spec.d_sgns;
        let config = json!({
            "language": "ar",
            "train": "train.json",
            "dev": "dev.json",
            "test": "test.json",
            "encoders": encoders,
            "targets": [TargetKind::Electra, TargetKind::Sgns],
            "training": { "max_lr": max_lr },
            "seed": 0,
            "out_dir": "out",
            "alignment": {
                "source_train": "en_train.json",
                "source_encoder": { "features": { "path": "features/source.jsonl" } },
                "source_target": "sgns",
                "target": "sgns",
                "mapped_train": "mapped_train.json",
                "mapped_dev": "mapped_dev.json",
                "use_gold_source": true,
                "aligner": { "d_in": d, "hidden": 4 * d, "bottleneck": d, "d_out": d }
            },
            "serve": { "manifest": "out/ensemble-electra.json" }
        });
        let path = dir.join("config.json");
        let text = serde_json::to_string_pretty(&config)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
