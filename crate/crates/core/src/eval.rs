//! Metric suite: element-mean MSE, mean cosine, normalized rank, P@1 and
//! P@10, plus the paired test/dev results table and JSON report records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::TargetKind;
use crate::error::{Error, Result};
use crate::math::{cosine, dot, normalized, Matrix};
use crate::retrieval::VocabIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub cosine: f64,
    /// Mean fraction of the pool scoring strictly above the target; lower
    /// is better.
    pub rank: f64,
    pub p_at_1: Option<f64>,
    pub p_at_10: Option<f64>,
    pub n_items: usize,
}

fn check_pairs(preds: &Matrix, targets: &Matrix) -> Result<()> {
    if preds.shape() != targets.shape() {
        return Err(Error::shape(
            "evaluate",
            format!("{}x{}", preds.rows(), preds.cols()),
            format!("{}x{}", targets.rows(), targets.cols()),
        ));
    }
    if preds.rows() == 0 {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    Ok(())
}

/// Mean per-item element-mean squared error and mean per-item cosine.
fn regression_scores(preds: &Matrix, targets: &Matrix) -> (f64, f64) {
    let d = preds.cols().max(1) as f64;
    let (mut mse, mut cos) = (0.0, 0.0);
    for (p, t) in preds.iter_rows().zip(targets.iter_rows()) {
        mse += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d;
        cos += cosine(p, t);
    }
    let n = preds.rows() as f64;
    (mse / n, cos / n)
}

/// Counts pool rows scoring strictly above the target's own pool row.
/// `rows` yields unit (or zero) vectors; `pred` is unit or zero.
fn strictly_better<'a>(
    pred_unit: &[f64],
    rows: impl Iterator<Item = &'a [f64]>,
    target: usize,
    target_row: &[f64],
) -> usize {
    let reference = dot(pred_unit, target_row);
    rows.enumerate()
        .filter(|&(j, r)| j != target && dot(pred_unit, r) > reference)
        .count()
}

/// MSE, cosine and rank of `preds` against `targets`, ranking each item's
/// target (row `target_pool_indices[i]` of `pool`) among all pool rows.
/// The report's precision fields are left empty.
pub fn evaluate(
    preds: &Matrix,
    targets: &Matrix,
    pool: &Matrix,
    target_pool_indices: &[usize],
) -> Result<EvalReport> {
    check_pairs(preds, targets)?;
    if pool.rows() == 0 {
        return Err(Error::InvalidArgument("empty ranking pool".into()));
    }
    if pool.cols() != preds.cols() {
        return Err(Error::shape(
            "evaluate",
            format!("pool width {}", preds.cols()),
            pool.cols(),
        ));
    }
    if target_pool_indices.len() != preds.rows() {
        return Err(Error::shape(
            "evaluate",
            format!("{} target indices", preds.rows()),
            target_pool_indices.len(),
        ));
    }
    if let Some(&bad) = target_pool_indices.iter().find(|&&t| t >= pool.rows()) {
        return Err(Error::InvalidArgument(format!(
            "target index {bad} outside pool of {}",
            pool.rows()
        )));
    }
    let unit_pool: Vec<Vec<f64>> = pool.iter_rows().map(normalized).collect();
    let (mse, cos) = regression_scores(preds, targets);
    let mut better = 0usize;
    for (p, &t) in preds.iter_rows().zip(target_pool_indices) {
        let q = normalized(p);
        better += strictly_better(&q, unit_pool.iter().map(Vec::as_slice), t, &unit_pool[t]);
    }
    let n = preds.rows();
    Ok(EvalReport {
        mse,
        cosine: cos,
        rank: better as f64 / (n as f64 * pool.rows() as f64),
        p_at_1: None,
        p_at_10: None,
        n_items: n,
    })
}

fn target_positions(index: &VocabIndex, target_ids: &[impl AsRef<str>]) -> Result<Vec<usize>> {
    target_ids
        .iter()
        .map(|id| {
            let id = id.as_ref();
            index
                .position(id)
                .ok_or_else(|| Error::Data(format!("target id `{id}` is not in the vocabulary")))
        })
        .collect()
}

/// Fraction of items whose target id is among the top `k` retrieved words.
pub fn precision_at_k(
    preds: &Matrix,
    target_ids: &[impl AsRef<str>],
    index: &VocabIndex,
    k: usize,
) -> Result<f64> {
    if preds.rows() != target_ids.len() {
        return Err(Error::shape(
            "precision_at_k",
            preds.rows(),
            target_ids.len(),
        ));
    }
    if preds.rows() == 0 {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    target_positions(index, target_ids)?;
    let results = index.batch_lookup(preds, k)?;
    let hits = results
        .iter()
        .zip(target_ids)
        .filter(|(res, id)| res.iter().any(|h| h.id == id.as_ref()))
        .count();
    Ok(hits as f64 / preds.rows() as f64)
}

/// All five metrics, ranking and retrieving against `index`.
pub fn full_report(
    preds: &Matrix,
    targets: &Matrix,
    target_ids: &[impl AsRef<str>],
    index: &VocabIndex,
) -> Result<EvalReport> {
    check_pairs(preds, targets)?;
    if target_ids.len() != preds.rows() {
        return Err(Error::shape("full_report", preds.rows(), target_ids.len()));
    }
    if index.dim() != preds.cols() {
        return Err(Error::shape(
            "full_report",
            format!("index dim {}", index.dim()),
            preds.cols(),
        ));
    }
    let positions = target_positions(index, target_ids)?;
    let (mse, cos) = regression_scores(preds, targets);

    let mut better = 0usize;
    let (mut top1, mut top10) = (0usize, 0usize);
    index.for_each_scored(preds, |i, scores| {
        let t = positions[i];
        let reference = scores[t];
        better += scores
            .iter()
            .enumerate()
            .filter(|&(j, &s)| j != t && s > reference)
            .count();
        let top = index.top_k_from_scores(scores, 10);
        if top.first() == Some(&t) {
            top1 += 1;
        }
        if top.contains(&t) {
            top10 += 1;
        }
    });
    let n = preds.rows() as f64;
    Ok(EvalReport {
        mse,
        cosine: cos,
        rank: better as f64 / (n * index.len() as f64),
        p_at_1: Some(top1 as f64 / n),
        p_at_10: Some(top10 as f64 / n),
        n_items: preds.rows(),
    })
}

/// Test and dev results for one table row.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairedReport {
    pub test: Option<EvalReport>,
    pub dev: Option<EvalReport>,
}

/// Renders a results table with `test / dev` cells, three decimals each.
///
/// Rounding follows Rust's `{:.3}`: the exact binary value is rounded to
/// nearest, exact ties to even. A missing side renders as `N/A`.
pub fn format_report(rows: &BTreeMap<(String, TargetKind), PairedReport>) -> String {
    let header = [
        "Subtask",
        "Embedding",
        "MSE",
        "Cosine",
        "Rank",
        "P@1",
        "P@10",
    ];
    let cell = |r: Option<&EvalReport>, f: fn(&EvalReport) -> Option<f64>| {
        r.and_then(f)
            .map_or_else(|| "N/A".to_string(), |v| format!("{v:.3}"))
    };
    let getters: [fn(&EvalReport) -> Option<f64>; 5] = [
        |r| Some(r.mse),
        |r| Some(r.cosine),
        |r| Some(r.rank),
        |r| r.p_at_1,
        |r| r.p_at_10,
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for ((subtask, kind), pair) in rows {
        let mut line = vec![subtask.clone(), kind_label(*kind).to_string()];
        for g in getters {
            line.push(format!(
                "{} / {}",
                cell(pair.test.as_ref(), g),
                cell(pair.dev.as_ref(), g)
            ));
        }
        table.push(line);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            table
                .iter()
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("-|-"));
        }
    }
    out
}

fn kind_label(kind: TargetKind) -> &'static str {
    match kind {
        TargetKind::Electra => "Electra",
        TargetKind::Sgns => "SGNS",
    }
}

/// Flat JSON export record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub subtask: String,
    pub embedding: TargetKind,
    pub split: String,
    pub mse: f64,
    pub cosine: f64,
    pub rank: f64,
    pub p1: Option<f64>,
    pub p10: Option<f64>,
    pub n: usize,
}

impl ReportRecord {
    pub fn new(subtask: &str, embedding: TargetKind, split: &str, r: &EvalReport) -> Self {
        ReportRecord {
            subtask: subtask.to_string(),
            embedding,
            split: split.to_string(),
            mse: r.mse,
            cosine: r.cosine,
            rank: r.rank,
            p1: r.p_at_1,
            p10: r.p_at_10,
            n: r.n_items,
        }
    }
}
