use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use revdict::data::{Split, TargetKind};
use revdict::pipeline::{self, EvalArgs, RunConfig};
use revdict::{service, Error, Result};

/// Reverse dictionary: definition text in, nearest words out.
#[derive(Debug, Parser)]
#[command(name = "revdict", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip test ids that have no translation instead of aborting.
    #[arg(long, global = true)]
    allow_partial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one head per (encoder, target) pair.
    Train,
    /// Exhaustive ensemble search on the dev split.
    Search {
        /// Checkpoints to search; defaults to every head under OUT/heads.
        checkpoints: Vec<PathBuf>,
    },
    /// Train the source head and the cross-lingual aligner.
    Align,
    /// Write ensemble predictions for a split.
    Predict {
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the ensemble on translated test glosses.
    TranslateTest {
        /// JSONL with one {"id", "gloss"} per line.
        #[arg(long)]
        translations: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a predictions file against a reference dictionary.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        target: TargetKind,
        /// Dictionaries forming the retrieval vocabulary (repeatable).
        #[arg(long = "vocab")]
        vocabulary: Vec<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value = "ar")]
        language: String,
        #[arg(long, default_value = "Subtask 1")]
        subtask: String,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Nearest words for a definition.
    Lookup {
        definition: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Start the HTTP lookup service.
    Serve {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn print(value: serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(&value).expect("JSON value")
    );
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train => {
            let cfg = load_config(&cli)?;
            let trained = pipeline::cmd_train(&cfg)?;
            print(json!(trained
                .iter()
                .map(|t| json!({
                    "encoder": t.encoder,
                    "target": t.target,
                    "checkpoint": show(&t.checkpoint),
                    "history": show(&t.history),
                    "best_epoch": t.summary.best_epoch,
                    "best_dev_cosine": t.summary.best_dev_cosine,
                }))
                .collect::<Vec<_>>()));
        }
        Command::Search { checkpoints } => {
            let cfg = load_config(&cli)?;
            let outcomes = pipeline::cmd_search(&cfg, checkpoints)?;
            print(json!(outcomes
                .iter()
                .map(|o| json!({
                    "target": o.target,
                    "subsets": o.result.rows.len(),
                    "selected": o.result.best().members,
                    "dev": o.result.best().report,
                    "csv": show(&o.csv),
                    "manifest": show(&o.manifest),
                }))
                .collect::<Vec<_>>()));
        }
        Command::Align => {
            let cfg = load_config(&cli)?;
            let o = pipeline::cmd_align(&cfg)?;
            print(json!({
                "source_head": show(&o.source_head),
                "aligner": show(&o.aligner),
                "dev_predictions": show(&o.dev_predictions),
                "head_dev_cosine": o.head_summary.best_dev_cosine,
                "aligner_dev_cosine": o.aligner_summary.best_dev_cosine,
                "dev": o.dev_report,
            }));
        }
        Command::Predict {
            split,
            manifest,
            output,
        } => {
            let cfg = load_config(&cli)?;
            let p = pipeline::cmd_predict(&cfg, manifest.as_deref(), *split, output)?;
            print(json!({ "predictions": show(output), "n": p.ids.len() }));
        }
        Command::TranslateTest {
            translations,
            manifest,
            output,
        } => {
            let cfg = load_config(&cli)?;
            let o = pipeline::cmd_translate_test(
                &cfg,
                translations,
                manifest.as_deref(),
                cli.allow_partial,
                output,
            )?;
            print(json!({
                "predictions": show(output),
                "n": o.predictions.ids.len(),
                "missing": o.missing.len(),
                "fallbacks": o.fallbacks,
                "report": o.report,
            }));
        }
        Command::Eval {
            predictions,
            reference,
            target,
            vocabulary,
            split,
            language,
            subtask,
            json: json_out,
        } => {
            let o = pipeline::cmd_eval(&EvalArgs {
                predictions: predictions.clone(),
                reference: reference.clone(),
                target: *target,
                vocabulary: vocabulary.clone(),
                language: language.clone(),
                split: *split,
                subtask: subtask.clone(),
            })?;
            let record = serde_json::to_string_pretty(&o.record)?;
            if let Some(p) = json_out {
                std::fs::write(p, format!("{record}\n")).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
            }
            println!("{record}");
            print!("{}", o.table);
        }
        Command::Lookup {
            definition,
            k,
            manifest,
        } => {
            let cfg = load_config(&cli)?;
            let hits = pipeline::cmd_lookup(&cfg, manifest.as_deref(), definition, *k)?;
            print(json!({ "results": hits }));
        }
        Command::Serve { manifest } => {
            let cfg = load_config(&cli)?;
            let manifest = manifest.clone();
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::State(e.to_string()))?;
            rt.block_on(service::serve(cfg, manifest))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_class() as u8)
        }
    }
}
