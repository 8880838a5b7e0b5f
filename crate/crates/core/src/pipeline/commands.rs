use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::align::{train_aligner, AlignerAE, AlignmentPipeline};
use crate::data::{
    load_dictionary, load_mapped, split_set, stable_hash, AlignedPair, DictEntry, DictionarySet,
    Split, SupervisedSet, TargetKind,
};
use crate::ensemble::{subset_search, Candidate, DevTargets, SearchResult};
use crate::error::{Error, Result};
use crate::eval::{evaluate, format_report, full_report, EvalReport, PairedReport, ReportRecord};
use crate::math::Matrix;
use crate::projection::{train_head, HeadMeta, HeadSpec, ProjectionHead, TrainedHead};
use crate::retrieval::{build_index_from, Hit, VocabIndex};
use crate::train::TrainingSummary;

use super::config::RunConfig;
use super::encoder::{Item, TextEncoder};
use super::engine::{Engine, EnsembleManifest, ManifestMember};
use super::io::{read_predictions, read_translations, write_json, write_predictions, Predictions};

pub type Encoders = BTreeMap<String, Arc<TextEncoder>>;

fn split_path(cfg: &RunConfig, split: Split) -> Result<&Path> {
    match split {
        Split::Train => cfg.require("train", &cfg.train),
        Split::Dev => cfg.require("dev", &cfg.dev),
        Split::Test => cfg.require("test", &cfg.test),
    }
}

pub fn load_split(cfg: &RunConfig, split: Split) -> Result<DictionarySet> {
    load_dictionary(split_path(cfg, split)?, &cfg.language, split)
}

/// Every configured dictionary entry, used to resolve glosses to stored
/// features. Later duplicates of an id are skipped.
pub fn known_entries(cfg: &RunConfig) -> Result<Vec<DictEntry>> {
    let mut paths: Vec<(&Path, &str)> = Vec::new();
    for p in [&cfg.train, &cfg.dev, &cfg.test].into_iter().flatten() {
        paths.push((p, &cfg.language));
    }
    for p in &cfg.vocabulary {
        paths.push((p, &cfg.language));
    }
    if let Some(a) = &cfg.alignment {
        paths.push((&a.source_train, &a.source_language));
        if let Some(p) = &a.source_dev {
            paths.push((p, &a.source_language));
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut loaded = HashSet::new();
    for (p, lang) in paths {
        if !loaded.insert(p.to_path_buf()) {
            continue;
        }
        for e in load_dictionary(p, lang, Split::Train)?.into_entries() {
            if seen.insert(e.id.clone()) {
                out.push(e);
            }
        }
    }
    Ok(out)
}

pub fn build_encoders(cfg: &RunConfig, known: &[DictEntry]) -> Result<Encoders> {
    if cfg.encoders.is_empty() {
        return Err(Error::Config("no encoders configured".into()));
    }
    cfg.encoders
        .iter()
        .map(|(name, spec)| {
            Ok((
                name.clone(),
                Arc::new(TextEncoder::from_spec(name, spec, known)?),
            ))
        })
        .collect()
}

/// Lookup vocabulary: the configured dictionaries, or train, dev and test
/// when none are listed. Entries without a `kind` vector are skipped.
pub fn vocabulary_index(cfg: &RunConfig, kind: TargetKind) -> Result<VocabIndex> {
    let mut paths: Vec<&Path> = cfg.vocabulary.iter().map(PathBuf::as_path).collect();
    if paths.is_empty() {
        paths.extend(
            [&cfg.train, &cfg.dev, &cfg.test]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path),
        );
    }
    if paths.is_empty() {
        return Err(Error::Config(
            "no dictionaries to build a vocabulary from".into(),
        ));
    }
    let sets = paths
        .iter()
        .map(|p| load_dictionary(p, &cfg.language, Split::Test))
        .collect::<Result<Vec<_>>>()?;
    index_over(sets.iter().flat_map(|s| s.entries()), kind)
}

fn index_over<'a>(
    entries: impl IntoIterator<Item = &'a DictEntry>,
    kind: TargetKind,
) -> Result<VocabIndex> {
    let mut seen = HashSet::new();
    build_index_from(
        entries.into_iter().filter(|e| seen.insert(e.id.as_str())),
        kind,
    )
}

/// Manifest path from the argument, the serve section, or the first target.
pub fn manifest_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.serve.manifest.clone())
        .unwrap_or_else(|| {
            cfg.out_dir
                .join(format!("ensemble-{}.json", cfg.targets[0]))
        })
}

/// Builds the serving engine: encoders, manifest ensemble and vocabulary.
pub fn load_engine(cfg: &RunConfig, manifest: Option<&Path>) -> Result<Engine> {
    let path = manifest_path(cfg, manifest);
    let m = EnsembleManifest::load(&path)?;
    let ensemble = m.load_ensemble(&path)?;
    let known = known_entries(cfg)?;
    let encoders = build_encoders(cfg, &known)?;
    let index = vocabulary_index(cfg, m.target)?;
    Engine::new(ensemble, encoders, Some(index))
}

/// Seed for a named component under a run seed.
pub fn derive_seed(run_seed: u64, name: &str) -> u64 {
    stable_hash(name.as_bytes(), run_seed)
}

/// Rows of `set` that have known features and a `target` vector.
fn supervised(set: &DictionarySet, enc: &TextEncoder, target: TargetKind) -> Result<SupervisedSet> {
    let mut feats = Vec::new();
    let mut tgts = Vec::new();
    let mut ids = Vec::new();
    let mut dropped = 0;
    for e in set.entries() {
        match (enc.known(&Item::from(e)), e.target(target)) {
            (Some(f), Some(t)) => {
                feats.extend(f);
                tgts.extend_from_slice(t);
                ids.push(e.id.clone());
            }
            _ => dropped += 1,
        }
    }
    if ids.is_empty() {
        return Err(Error::Data(format!(
            "{}/{}: no entries have both `{}` features and a {target} vector",
            set.language,
            set.split,
            enc.name()
        )));
    }
    if dropped > 0 {
        log::warn!(
            "{}/{} with `{}` ({target}): dropped {dropped} entries",
            set.language,
            set.split,
            enc.name()
        );
    }
    let n = ids.len();
    let d_out = tgts.len() / n;
    Ok(SupervisedSet {
        features: Matrix::from_vec(n, enc.dim(), feats)?,
        targets: Matrix::from_vec(n, d_out, tgts)?,
        ids,
        dropped,
    })
}

fn fit_head(
    cfg: &RunConfig,
    enc: &TextEncoder,
    target: TargetKind,
    train: &DictionarySet,
    dev: &DictionarySet,
    seed_name: &str,
) -> Result<TrainedHead> {
    let tr = supervised(train, enc, target)?;
    let dv = supervised(dev, enc, target)?;
    if tr.targets.cols() != dv.targets.cols() {
        return Err(Error::shape(
            "train/dev targets",
            tr.targets.cols(),
            dv.targets.cols(),
        ));
    }
    let seed = derive_seed(cfg.seed, seed_name);
    let mut spec = HeadSpec::new(enc.dim(), tr.targets.cols(), target, enc.name()).seed(seed);
    if let Some(h) = cfg.d_hidden {
        spec = spec.hidden(h);
    }
    let training = crate::optim::TrainConfig {
        seed,
        ..cfg.training
    };
    train_head(ProjectionHead::init(&spec)?, &tr, &dv, &training)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadHistory {
    pub meta: HeadMeta,
    pub training: TrainingSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedArtifact {
    pub encoder: String,
    pub target: TargetKind,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub summary: TrainingSummary,
}

pub fn head_checkpoint_path(out_dir: &Path, encoder: &str, target: TargetKind) -> PathBuf {
    out_dir
        .join("heads")
        .join(format!("{encoder}-{target}.ckpt.json"))
}

/// Trains one head per (encoder, target) pair and writes its checkpoint
/// and history.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<TrainedArtifact>> {
    let train = load_split(cfg, Split::Train)?;
    let dev = load_split(cfg, Split::Dev)?;
    let known = known_entries(cfg)?;
    let encoders = build_encoders(cfg, &known)?;
    let mut out = Vec::new();
    for (name, enc) in &encoders {
        for &target in &cfg.targets {
            let head = fit_head(
                cfg,
                enc,
                target,
                &train,
                &dev,
                &format!("head/{name}/{target}"),
            )?;
            let checkpoint = head_checkpoint_path(&cfg.out_dir, name, target);
            head.save(&checkpoint)?;
            let history = checkpoint.with_file_name(format!("{name}-{target}.history.json"));
            write_json(
                &history,
                &HeadHistory {
                    meta: head.meta().clone(),
                    training: head.summary.clone(),
                },
            )?;
            out.push(TrainedArtifact {
                encoder: name.clone(),
                target,
                checkpoint,
                history,
                summary: head.summary,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub target: TargetKind,
    pub result: SearchResult,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

fn relative_to(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base)
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| path.to_path_buf())
}

fn discover_heads(out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join("heads");
    let rd = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut found = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(&dir, e))?.path();
        if p.to_string_lossy().ends_with(".ckpt.json") {
            found.push(p);
        }
    }
    found.sort();
    Ok(found)
}

/// Scores every subset of the given heads on the dev split. Without
/// explicit checkpoints, all heads under `out_dir/heads` are searched,
/// one search per target kind.
pub fn cmd_search(cfg: &RunConfig, checkpoints: &[PathBuf]) -> Result<Vec<SearchOutcome>> {
    let explicit = !checkpoints.is_empty();
    let paths = if explicit {
        checkpoints.to_vec()
    } else {
        discover_heads(&cfg.out_dir)?
    };
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "no checkpoints under {}",
            cfg.out_dir.join("heads").display()
        )));
    }
    let mut groups: BTreeMap<TargetKind, Vec<(PathBuf, TrainedHead)>> = BTreeMap::new();
    for p in paths {
        let head = TrainedHead::load(&p)?;
        groups
            .entry(head.meta().target)
            .or_default()
            .push((p, head));
    }
    if explicit && groups.len() > 1 {
        let kinds: Vec<String> = groups.keys().map(|k| k.to_string()).collect();
        return Err(Error::InvalidArgument(format!(
            "checkpoints mix target kinds ({}); search one kind at a time",
            kinds.join(", ")
        )));
    }
    let dev = load_split(cfg, Split::Dev)?;
    let known = known_entries(cfg)?;
    let encoders = build_encoders(cfg, &known)?;
    let mut outcomes = Vec::new();
    for (target, heads) in groups {
        let gold: Vec<&DictEntry> = dev
            .entries()
            .iter()
            .filter(|e| e.target(target).is_some())
            .collect();
        if gold.is_empty() {
            return Err(Error::Data(format!("dev split has no {target} vectors")));
        }
        let items: Vec<Item> = gold.iter().map(|e| Item::from(*e)).collect();
        let rows: Vec<&[f64]> = gold
            .iter()
            .map(|e| e.target(target).expect("filtered"))
            .collect();
        let targets = Matrix::from_rows(&rows)?;
        let dev_targets = DevTargets {
            pool: targets.clone(),
            targets,
            target_pool_indices: (0..gold.len()).collect(),
        };
        let mut feats: HashMap<String, Matrix> = HashMap::new();
        let mut names = HashSet::new();
        let mut cands = Vec::new();
        for (p, head) in &heads {
            let enc_name = head.meta().encoder.clone();
            if !names.insert(enc_name.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "two {target} checkpoints use encoder `{enc_name}` ({})",
                    p.display()
                )));
            }
            let enc = encoders.get(&enc_name).ok_or_else(|| {
                Error::Config(format!(
                    "{} needs encoder `{enc_name}`, which is not configured",
                    p.display()
                ))
            })?;
            if !feats.contains_key(&enc_name) {
                feats.insert(enc_name.clone(), enc.encode_all(&items)?);
            }
            cands.push(Candidate {
                name: enc_name.clone(),
                predictions: head.predict(&feats[&enc_name])?,
            });
        }
        let result = subset_search(&cands, &dev_targets)?;
        let csv = cfg.out_dir.join(format!("search-{target}.csv"));
        if let Some(d) = csv.parent() {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        result.save_csv(&csv)?;
        let best = result.best();
        let mut members: Vec<ManifestMember> = heads
            .iter()
            .filter(|(_, h)| best.members.contains(&h.meta().encoder))
            .map(|(p, h)| ManifestMember {
                name: h.meta().encoder.clone(),
                encoder: h.meta().encoder.clone(),
                checkpoint: relative_to(p, &cfg.out_dir),
            })
            .collect();
        members.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = cfg.out_dir.join(format!("ensemble-{target}.json"));
        EnsembleManifest {
            target,
            members,
            dev_cosine: best.report.cosine,
        }
        .save(&manifest)?;
        log::info!(
            "{target}: selected [{}] with dev cosine {:.4} over {} subsets",
            best.members.join(", "),
            best.report.cosine,
            result.rows.len()
        );
        outcomes.push(SearchOutcome {
            target,
            result,
            csv,
            manifest,
        });
    }
    Ok(outcomes)
}

/// Predicts every entry of a split with the manifest ensemble and writes
/// the predictions file.
pub fn cmd_predict(
    cfg: &RunConfig,
    manifest: Option<&Path>,
    split: Split,
    out: &Path,
) -> Result<Predictions> {
    let engine = load_engine(cfg, manifest)?;
    let set = load_split(cfg, split)?;
    let items: Vec<Item> = set.entries().iter().map(Item::from).collect();
    run_items(&engine, &items, out)
}

fn run_items(engine: &Engine, items: &[Item], out: &Path) -> Result<Predictions> {
    let embeddings = engine.predict_items(items)?;
    let ids: Vec<String> = items
        .iter()
        .map(|i| i.id.clone().expect("dictionary items carry ids"))
        .collect();
    write_predictions(out, &ids, &embeddings)?;
    Ok(Predictions { ids, embeddings })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslateOutcome {
    pub predictions: Predictions,
    /// Test ids with no translation (only nonempty with `allow_partial`).
    pub missing: Vec<String>,
    /// Translated items encoded through the hash-gram fallback.
    pub fallbacks: usize,
    /// Present when the test split carries gold vectors for the target.
    pub report: Option<EvalReport>,
}

/// Runs the target-language ensemble on translated test glosses. Items go
/// through exactly the same encode/predict path as direct test prediction.
pub fn cmd_translate_test(
    cfg: &RunConfig,
    translations: &Path,
    manifest: Option<&Path>,
    allow_partial: bool,
    out: &Path,
) -> Result<TranslateOutcome> {
    let test = load_split(cfg, Split::Test)?;
    let mut by_id: HashMap<String, String> = read_translations(translations)?.into_iter().collect();
    let mut items = Vec::new();
    let mut missing = Vec::new();
    for e in test.entries() {
        match by_id.remove(&e.id) {
            Some(gloss) => items.push(Item::new(e.id.clone(), gloss)),
            None => missing.push(e.id.clone()),
        }
    }
    if !by_id.is_empty() {
        log::warn!(
            "{} translations have ids outside the test split; ignored",
            by_id.len()
        );
    }
    if !missing.is_empty() {
        const SHOWN: usize = 20;
        let mut list = missing
            .iter()
            .take(SHOWN)
            .cloned()
            .collect::<Vec<_>>()
            .join(", ");
        if missing.len() > SHOWN {
            list.push_str(&format!(", … ({} more)", missing.len() - SHOWN));
        }
        if !allow_partial {
            return Err(Error::Data(format!(
                "{} test ids have no translation: {list}",
                missing.len()
            )));
        }
        log::warn!(
            "{} test ids have no translation and are skipped: {list}",
            missing.len()
        );
    }
    if items.is_empty() {
        return Err(Error::Data("no test ids have translations".into()));
    }
    let engine = load_engine(cfg, manifest)?;
    let before = engine.fallback_count();
    let predictions = run_items(&engine, &items, out)?;
    let fallbacks = engine.fallback_count() - before;
    let report = if test.count_with(engine.target()) == test.len() {
        let index = engine.index().expect("engine built with an index");
        Some(score_predictions(
            &predictions,
            &test,
            engine.target(),
            index,
        )?)
    } else {
        None
    };
    Ok(TranslateOutcome {
        predictions,
        missing,
        fallbacks,
        report,
    })
}

/// All five metrics for `preds` against the gold `target` vectors in
/// `reference`, ranking and retrieving over `index`.
pub fn score_predictions(
    preds: &Predictions,
    reference: &DictionarySet,
    target: TargetKind,
    index: &VocabIndex,
) -> Result<EvalReport> {
    let rows = preds
        .ids
        .iter()
        .map(|id| {
            reference
                .get(id)
                .and_then(|e| e.target(target))
                .ok_or_else(|| {
                    Error::Data(format!(
                        "prediction id `{id}` has no {target} reference vector"
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    full_report(
        &preds.embeddings,
        &Matrix::from_rows(&rows)?,
        &preds.ids,
        index,
    )
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub predictions: PathBuf,
    pub reference: PathBuf,
    pub target: TargetKind,
    /// Dictionaries forming the retrieval vocabulary; the reference alone
    /// when empty.
    pub vocabulary: Vec<PathBuf>,
    pub language: String,
    pub split: Split,
    pub subtask: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub record: ReportRecord,
    pub table: String,
}

/// Scores a predictions file against a reference dictionary.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutcome> {
    let preds = read_predictions(&args.predictions)?;
    let reference = load_dictionary(&args.reference, &args.language, args.split)?;
    let index = if args.vocabulary.is_empty() {
        index_over(reference.entries(), args.target)?
    } else {
        let sets = args
            .vocabulary
            .iter()
            .map(|p| load_dictionary(p, &args.language, args.split))
            .collect::<Result<Vec<_>>>()?;
        index_over(sets.iter().flat_map(|s| s.entries()), args.target)?
    };
    let report = score_predictions(&preds, &reference, args.target, &index)?;
    let record = ReportRecord::new(&args.subtask, args.target, args.split.as_str(), &report);
    let mut rows = BTreeMap::new();
    let pair = match args.split {
        Split::Dev => PairedReport {
            test: None,
            dev: Some(report),
        },
        _ => PairedReport {
            test: Some(report),
            dev: None,
        },
    };
    rows.insert((args.subtask.clone(), args.target), pair);
    Ok(EvalOutcome {
        report,
        record,
        table: format_report(&rows),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignOutcome {
    pub source_head: PathBuf,
    pub aligner: PathBuf,
    pub dev_predictions: PathBuf,
    pub head_summary: TrainingSummary,
    pub aligner_summary: TrainingSummary,
    /// End-to-end (source head then aligner) on the mapped dev pairs.
    pub dev_report: EvalReport,
}

/// Trains the source-language head and the aligner that maps its output
/// space onto the target-language embedding space.
pub fn cmd_align(cfg: &RunConfig) -> Result<AlignOutcome> {
    let a = cfg
        .alignment
        .as_ref()
        .ok_or_else(|| Error::Config("`alignment` section is required for align".into()))?;
    let lang = a.source_language.as_str();
    let src_train_full = load_dictionary(&a.source_train, lang, Split::Train)?;
    let (src_train, src_dev) = match &a.source_dev {
        Some(p) => (src_train_full, load_dictionary(p, lang, Split::Dev)?),
        None => split_set(&src_train_full, a.dev_fraction, cfg.seed)?,
    };
    let known = known_entries(cfg)?;
    let enc = TextEncoder::from_spec("source", &a.source_encoder, &known)?;
    let head = fit_head(
        cfg,
        &enc,
        a.source_target,
        &src_train,
        &src_dev,
        &format!("align/head/{}", a.source_target),
    )?;
    let dir = cfg.out_dir.join("align");
    let head_path = dir.join(format!("source-{}.ckpt.json", a.source_target));
    head.save(&head_path)?;

    let sources: HashMap<&str, &DictEntry> = src_train
        .entries()
        .iter()
        .chain(src_dev.entries())
        .map(|e| (e.id.as_str(), e))
        .collect();
    let to_pairs = |path: &Path| -> Result<Vec<AlignedPair>> {
        let mapped = load_mapped(path)?;
        let mut kept = Vec::new();
        let mut items = Vec::new();
        for m in &mapped {
            let Some(tgt) = m.target(a.target) else {
                continue;
            };
            let src_entry = sources.get(m.src_id.as_str());
            let gloss = if m.src_gloss.is_empty() {
                match src_entry {
                    Some(e) => e.gloss.clone(),
                    None => continue,
                }
            } else {
                m.src_gloss.clone()
            };
            if a.use_gold_source {
                let Some(v) = src_entry.and_then(|e| e.target(a.source_target)) else {
                    continue;
                };
                kept.push((m, tgt, Some(v.to_vec())));
            } else {
                kept.push((m, tgt, None));
                items.push(Item::new(m.src_id.clone(), gloss));
            }
        }
        let predicted = if items.is_empty() {
            None
        } else {
            Some(head.predict(&enc.encode_all(&items)?)?)
        };
        let mut row = 0;
        let pairs: Vec<AlignedPair> = kept
            .into_iter()
            .map(|(m, tgt, gold)| {
                let src_embedding = gold.unwrap_or_else(|| {
                    row += 1;
                    predicted
                        .as_ref()
                        .expect("items predicted")
                        .row(row - 1)
                        .to_vec()
                });
                AlignedPair {
                    src_id: m.src_id.clone(),
                    tgt_id: m.tgt_id.clone(),
                    src_embedding,
                    tgt_embedding: tgt.to_vec(),
                }
            })
            .collect();
        if pairs.len() < mapped.len() {
            log::warn!(
                "{}: {} of {} mapped rows lack a source or {} vector",
                path.display(),
                mapped.len() - pairs.len(),
                mapped.len(),
                a.target
            );
        }
        if pairs.is_empty() {
            return Err(Error::Data(format!(
                "{} yields no aligned pairs",
                path.display()
            )));
        }
        Ok(pairs)
    };
    let train_pairs = to_pairs(&a.mapped_train)?;
    let dev_pairs = to_pairs(&a.mapped_dev)?;

    let (d_src, d_tgt) = (
        train_pairs[0].src_embedding.len(),
        train_pairs[0].tgt_embedding.len(),
    );
    if a.aligner.d_in != d_src || a.aligner.d_out != d_tgt {
        return Err(Error::Config(format!(
            "alignment.aligner expects {} → {}, data is {d_src} → {d_tgt}",
            a.aligner.d_in, a.aligner.d_out
        )));
    }
    for w in a.aligner.warnings() {
        log::warn!("aligner: {w}");
    }
    let training = crate::optim::TrainConfig {
        seed: derive_seed(cfg.seed, &format!("align/aligner/{}", a.target)),
        ..cfg.training
    };
    let aligner = train_aligner(
        AlignerAE::init(a.aligner)?,
        &train_pairs,
        &dev_pairs,
        &training,
    )?;
    let aligner_path = dir.join(format!("aligner-{}.ckpt.json", a.target));
    aligner.save(&aligner_path)?;

    // end to end: source text → head → aligner, scored on the mapped dev rows
    let mapped_dev = load_mapped(&a.mapped_dev)?;
    let dev_rows: Vec<_> = mapped_dev
        .iter()
        .filter(|m| m.target(a.target).is_some())
        .filter_map(|m| {
            let gloss = if m.src_gloss.is_empty() {
                sources.get(m.src_id.as_str())?.gloss.clone()
            } else {
                m.src_gloss.clone()
            };
            Some((m, Item::new(m.src_id.clone(), gloss)))
        })
        .collect();
    let head_summary = head.summary.clone();
    let aligner_summary = aligner.summary.clone();
    let pipeline = AlignmentPipeline::new(head, aligner)?;
    let items: Vec<Item> = dev_rows.iter().map(|(_, i)| i.clone()).collect();
    let preds = pipeline.predict(&enc.encode_all(&items)?)?;
    let gold: Vec<&[f64]> = dev_rows
        .iter()
        .map(|(m, _)| m.target(a.target).expect("filtered"))
        .collect();
    let targets = Matrix::from_rows(&gold)?;
    let dev_report = evaluate(
        &preds,
        &targets,
        &targets,
        &(0..gold.len()).collect::<Vec<_>>(),
    )?;
    let ids: Vec<String> = dev_rows.iter().map(|(m, _)| m.tgt_id.clone()).collect();
    let dev_predictions = dir.join(format!("dev-predictions-{}.jsonl", a.target));
    write_predictions(&dev_predictions, &ids, &preds)?;
    Ok(AlignOutcome {
        source_head: head_path,
        aligner: aligner_path,
        dev_predictions,
        head_summary,
        aligner_summary,
        dev_report,
    })
}

/// Offline lookup through the same engine the service uses.
pub fn cmd_lookup(
    cfg: &RunConfig,
    manifest: Option<&Path>,
    definition: &str,
    k: usize,
) -> Result<Vec<Hit>> {
    load_engine(cfg, manifest)?.lookup(definition, k)
}
