//! Unweighted prediction averaging over trained heads and exhaustive
//! subset search on the dev set.

use std::io::Write;
use std::path::Path;

use crate::data::TargetKind;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::math::Matrix;
use crate::projection::TrainedHead;

/// Largest candidate count accepted by [`subset_search`].
pub const MAX_SEARCH_HEADS: usize = 16;

/// Cosines within this distance of the best are treated as tied.
pub const TIE_EPSILON: f64 = 1e-12;

/// Elementwise mean of equally shaped matrices. Each element is summed in
/// ascending value order, so the result does not depend on input order.
pub fn average(preds: &[&Matrix]) -> Result<Matrix> {
    let first = preds
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to average".into()))?;
    if let Some(bad) = preds.iter().find(|p| p.shape() != first.shape()) {
        return Err(Error::shape(
            "average",
            format!("{}x{}", first.rows(), first.cols()),
            format!("{}x{}", bad.rows(), bad.cols()),
        ));
    }
    if preds.len() == 1 {
        return Ok((*first).clone());
    }
    let n = preds.len() as f64;
    let mut out = Matrix::zeros(first.rows(), first.cols());
    let mut buf = Vec::with_capacity(preds.len());
    for (k, o) in out.as_mut_slice().iter_mut().enumerate() {
        buf.clear();
        buf.extend(preds.iter().map(|p| p.as_slice()[k]));
        buf.sort_unstable_by(f64::total_cmp);
        *o = buf.iter().sum::<f64>() / n;
    }
    Ok(out)
}

/// Named heads sharing a target space.
#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<(String, TrainedHead)>,
}

impl Ensemble {
    pub fn new(members: Vec<(String, TrainedHead)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::InvalidArgument(
                "an ensemble needs at least one member".into(),
            ));
        };
        let (d_out, target) = (first.meta().d_out, first.meta().target);
        for (name, h) in &members {
            if h.meta().d_out != d_out || h.meta().target != target {
                return Err(Error::InvalidArgument(format!(
                    "member `{name}` predicts {}-d {}, ensemble uses {d_out}-d {target}",
                    h.meta().d_out,
                    h.meta().target
                )));
            }
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[(String, TrainedHead)] {
        &self.members
    }

    pub fn target(&self) -> TargetKind {
        self.members[0].1.meta().target
    }

    pub fn d_out(&self) -> usize {
        self.members[0].1.meta().d_out
    }

    /// Averages member predictions; `features[i]` feeds member `i` (members
    /// may read different feature stores).
    pub fn predict(&self, features: &[&Matrix]) -> Result<Matrix> {
        if features.len() != self.members.len() {
            return Err(Error::shape(
                "Ensemble::predict",
                self.members.len(),
                features.len(),
            ));
        }
        let rows = features[0].rows();
        if let Some(bad) = features.iter().find(|f| f.rows() != rows) {
            return Err(Error::shape(
                "Ensemble::predict",
                format!("{rows} rows"),
                bad.rows(),
            ));
        }
        let preds = self
            .members
            .iter()
            .zip(features)
            .map(|((_, h), f)| h.predict(f))
            .collect::<Result<Vec<_>>>()?;
        average(&preds.iter().collect::<Vec<_>>())
    }
}

/// One search candidate: a head's name and its dev predictions.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub predictions: Matrix,
}

/// Gold side of the dev evaluation.
#[derive(Debug, Clone)]
pub struct DevTargets {
    pub targets: Matrix,
    pub pool: Matrix,
    pub target_pool_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRow {
    /// Member names, sorted.
    pub members: Vec<String>,
    pub mask: u32,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// One row per nonempty subset, by ascending bitmask.
    pub rows: Vec<SubsetRow>,
    pub selected: usize,
}

impl SearchResult {
    pub fn best(&self) -> &SubsetRow {
        &self.rows[self.selected]
    }

    /// CSV with `members,mse,cosine,rank`; members are comma-joined.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["members", "mse", "cosine", "rank"])?;
        for r in &self.rows {
            out.write_record([
                r.members.join(","),
                r.report.mse.to_string(),
                r.report.cosine.to_string(),
                r.report.rank.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Scores every nonempty subset of `candidates` on the dev set. Selection
/// is by mean dev cosine; near-ties (within [`TIE_EPSILON`]) go to the
/// lexicographically smallest sorted member-name list.
pub fn subset_search(candidates: &[Candidate], dev: &DevTargets) -> Result<SearchResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "subset search needs at least one head".into(),
        ));
    }
    if candidates.len() > MAX_SEARCH_HEADS {
        return Err(Error::InvalidArgument(format!(
            "exhaustive search over {} heads exceeds the limit of {MAX_SEARCH_HEADS}",
            candidates.len()
        )));
    }
    let n = candidates.len();
    let mut rows = Vec::with_capacity((1usize << n) - 1);
    for mask in 1u32..(1u32 << n) {
        let picked: Vec<&Candidate> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &candidates[i])
            .collect();
        let preds = average(&picked.iter().map(|c| &c.predictions).collect::<Vec<_>>())?;
        let report = evaluate(&preds, &dev.targets, &dev.pool, &dev.target_pool_indices)?;
        let mut members: Vec<String> = picked.iter().map(|c| c.name.clone()).collect();
        members.sort();
        rows.push(SubsetRow {
            members,
            mask,
            report,
        });
    }
    let best_cos = rows
        .iter()
        .map(|r| r.report.cosine)
        .fold(f64::NEG_INFINITY, f64::max);
    let selected = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.report.cosine >= best_cos - TIE_EPSILON)
        .min_by(|(_, a), (_, b)| a.members.cmp(&b.members))
        .map(|(i, _)| i)
        .expect("at least one row");
    Ok(SearchResult { rows, selected })
}
