//! Trains a small ensemble on synthetic data and serves it over HTTP.
//!
//!     cargo run --release --example serve
//!     curl -s localhost:8080/lookup -d '{"definition": "...", "k": 5}' \
//!          -H 'content-type: application/json'
//!
//! The port honors REVDICT_PORT.

use revdict::pipeline::{cmd_search, cmd_train, RunConfig};
use revdict::service;
use revdict::synth::{SynthCorpus, SynthSpec};

#[tokio::main]
async fn main() -> revdict::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = tempfile::tempdir().expect("temp dir");
    let corpus = SynthCorpus::generate(SynthSpec::default())?;
    let cfg = RunConfig::load(corpus.write(dir.path(), 1e-2)?)?;
    cmd_train(&cfg)?;
    cmd_search(&cfg, &[])?;

    println!("try one of these definitions:");
    for e in corpus.test.entries().iter().take(3) {
        println!("  {:<10} {}", e.word, e.gloss);
    }
    service::serve(cfg, None).await
}
