//! Writes a synthetic corpus and run config for trying the CLI.
//!
//!     cargo run --example make_corpus -- /tmp/rd
//!     cargo run --bin revdict -- --config /tmp/rd/config.json train

use revdict::synth::{SynthCorpus, SynthSpec};

fn main() -> revdict::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synthetic-corpus".into());
    let corpus = SynthCorpus::generate(SynthSpec::default())?;
    let config = corpus.write(dir.as_ref(), 1e-2)?;
    println!("{}", config.display());
    Ok(())
}
