use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::AlignerConfig;
use crate::data::TargetKind;
use crate::error::{Error, Result};
use crate::optim::TrainConfig;

/// Where a named encoder's features come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum EncoderSpec {
    /// Precomputed JSONL feature files, merged in order.
    Features {
        path: PathBuf,
        #[serde(default)]
        extra: Vec<PathBuf>,
        /// Seed for the hash-gram fallback used on unseen text.
        #[serde(default)]
        fallback_seed: u64,
    },
    /// The built-in hash-gram encoder.
    Hashgram {
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl EncoderSpec {
    /// Collects input paths and rejects unusable widths.
    fn check<'a>(&'a self, name: &str, inputs: &mut Vec<&'a Path>) -> Result<()> {
        match self {
            EncoderSpec::Features { path, extra, .. } => {
                inputs.push(path);
                inputs.extend(extra.iter().map(PathBuf::as_path));
            }
            EncoderSpec::Hashgram { dim, .. } if *dim < 8 => {
                return Err(Error::Config(format!(
                    "encoder `{name}`: hash-gram dim must be ≥ 8"
                )))
            }
            EncoderSpec::Hashgram { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentConfig {
    #[serde(default = "default_source_language")]
    pub source_language: String,
    pub source_train: PathBuf,
    /// When absent, `source_train` is split with `dev_fraction`.
    #[serde(default)]
    pub source_dev: Option<PathBuf>,
    #[serde(default = "default_dev_fraction")]
    pub dev_fraction: f64,
    /// Encoder for source-language definitions.
    pub source_encoder: EncoderSpec,
    #[serde(default = "default_target")]
    pub source_target: TargetKind,
    #[serde(default = "default_target")]
    pub target: TargetKind,
    pub mapped_train: PathBuf,
    pub mapped_dev: PathBuf,
    /// Train on gold source-language vectors instead of head predictions.
    #[serde(default)]
    pub use_gold_source: bool,
    #[serde(default)]
    pub aligner: AlignerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: default_host(),
            port: default_port(),
            manifest: None,
            ui_dir: None,
        }
    }
}

/// Run configuration, read from a JSON document. Relative paths resolve
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Dictionaries indexed for lookup; defaults to train, dev and test.
    #[serde(default)]
    pub vocabulary: Vec<PathBuf>,
    #[serde(default)]
    pub encoders: BTreeMap<String, EncoderSpec>,
    #[serde(default = "default_targets")]
    pub targets: Vec<TargetKind>,
    #[serde(default)]
    pub d_hidden: Option<usize>,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub alignment: Option<AlignmentConfig>,
    #[serde(default)]
    pub serve: ServeConfig,
}

fn default_language() -> String {
    "ar".into()
}
fn default_source_language() -> String {
    "en".into()
}
fn default_dev_fraction() -> f64 {
    0.2
}
fn default_target() -> TargetKind {
    TargetKind::Electra
}
fn default_targets() -> Vec<TargetKind> {
    TargetKind::ALL.to_vec()
}
fn default_out_dir() -> PathBuf {
    "out".into()
}
fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_port() -> u16 {
    8080
}

impl RunConfig {
    /// Parses, resolves relative paths against `path`'s directory and
    /// validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.train, &mut self.dev, &mut self.test]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.vocabulary.iter_mut().for_each(fix);
        for spec in self.encoders.values_mut() {
            if let EncoderSpec::Features { path, extra, .. } = spec {
                fix(path);
                extra.iter_mut().for_each(fix);
            }
        }
        fix(&mut self.out_dir);
        if let Some(a) = &mut self.alignment {
            fix(&mut a.source_train);
            if let Some(p) = &mut a.source_dev {
                fix(p);
            }
            fix(&mut a.mapped_train);
            fix(&mut a.mapped_dev);
            if let EncoderSpec::Features { path, extra, .. } = &mut a.source_encoder {
                fix(path);
                extra.iter_mut().for_each(fix);
            }
        }
        for p in [&mut self.serve.manifest, &mut self.serve.ui_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Every referenced input path must exist; encoders must be well formed.
    pub fn validate(&self) -> Result<()> {
        let mut inputs: Vec<&Path> = Vec::new();
        inputs.extend(self.train.iter().map(PathBuf::as_path));
        inputs.extend(self.dev.iter().map(PathBuf::as_path));
        inputs.extend(self.test.iter().map(PathBuf::as_path));
        inputs.extend(self.vocabulary.iter().map(PathBuf::as_path));
        for (name, spec) in &self.encoders {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(Error::Config(format!("invalid encoder name `{name}`")));
            }
            spec.check(name, &mut inputs)?;
        }
        if let Some(a) = &self.alignment {
            inputs.push(&a.source_train);
            inputs.extend(a.source_dev.iter().map(PathBuf::as_path));
            inputs.push(&a.mapped_train);
            inputs.push(&a.mapped_dev);
            a.source_encoder
                .check("alignment.source_encoder", &mut inputs)?;
        }
        inputs.extend(self.serve.ui_dir.iter().map(PathBuf::as_path));
        if let Some(missing) = inputs.iter().find(|p| !p.exists()) {
            return Err(Error::Config(format!(
                "path does not exist: {}",
                missing.display()
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("`targets` must not be empty".into()));
        }
        self.training
            .validate()
            .map_err(|e| Error::Config(format!("training: {e}")))?;
        Ok(())
    }

    pub fn require<'a>(&self, field: &'static str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{field}` is required for this command")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_json(r#"{"bogus": 1}"#, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::from_json(r#"{"training": {"lr": 1}}"#, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn missing_paths_rejected() {
        let err = RunConfig::from_json(
            r#"{"encoders": {"m": {"features": {"path": "nope.jsonl"}}}}"#,
            Path::new("/definitely/not"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("nope.jsonl"));
    }

    #[test]
    fn defaults_follow_training_table() {
        let cfg = RunConfig::from_json(
            r#"{"encoders": {"h": {"hashgram": {"dim": 64}}}}"#,
            Path::new("/tmp"),
        )
        .unwrap();
        assert_eq!(cfg.training, TrainConfig::default());
        assert_eq!(cfg.targets, vec![TargetKind::Electra, TargetKind::Sgns]);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/out"));
    }
}
