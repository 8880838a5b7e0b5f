use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    id: String,
    embedding: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslationLine {
    id: String,
    gloss: String,
}

/// Predicted embeddings keyed by entry id, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub ids: Vec<String>,
    pub embeddings: Matrix,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Calls `f` with each nonblank line and its 1-based number.
fn each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        f(i + 1, &line).map_err(|e| match e {
            Error::Line { .. } => e,
            other => Error::Line {
                path: path.into(),
                line: i + 1,
                reason: other.to_string(),
            },
        })?;
    }
    Ok(())
}

/// Writes one `{"id", "embedding"}` object per line.
pub fn write_predictions(
    path: impl AsRef<Path>,
    ids: &[String],
    embeddings: &Matrix,
) -> Result<()> {
    let path = path.as_ref();
    if ids.len() != embeddings.rows() {
        return Err(Error::shape(
            "write_predictions",
            embeddings.rows(),
            ids.len(),
        ));
    }
    let mut w = create(path)?;
    for (id, row) in ids.iter().zip(embeddings.iter_rows()) {
        serde_json::to_writer(
            &mut w,
            &PredictionLine {
                id: id.clone(),
                embedding: row.to_vec(),
            },
        )?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Predictions> {
    let path = path.as_ref();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    let mut seen = std::collections::HashSet::new();
    each_line(path, |_, line| {
        let rec: PredictionLine = serde_json::from_str(line)?;
        let d = *dim.get_or_insert(rec.embedding.len());
        if rec.embedding.len() != d || d == 0 {
            return Err(Error::Data(format!(
                "embedding has dimension {}, expected {d}",
                rec.embedding.len()
            )));
        }
        if rec.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding for `{}`", rec.id)));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::Data(format!("duplicate id `{}`", rec.id)));
        }
        ids.push(rec.id);
        data.extend(rec.embedding);
        Ok(())
    })?;
    let d = dim.ok_or_else(|| Error::Data(format!("{} holds no predictions", path.display())))?;
    Ok(Predictions {
        embeddings: Matrix::from_vec(ids.len(), d, data)?,
        ids,
    })
}

/// Reads `{"id", "gloss"}` lines; later duplicates are rejected.
pub fn read_translations(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    each_line(path, |_, line| {
        let rec: TranslationLine = serde_json::from_str(line)?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::Data(format!("duplicate id `{}`", rec.id)));
        }
        out.push((rec.id, rec.gloss));
        Ok(())
    })?;
    Ok(out)
}

pub fn write_translations(path: impl AsRef<Path>, rows: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for (id, gloss) in rows {
        serde_json::to_writer(
            &mut w,
            &TranslationLine {
                id: id.clone(),
                gloss: gloss.clone(),
            },
        )?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
