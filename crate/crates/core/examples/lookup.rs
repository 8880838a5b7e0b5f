//! Exact cosine top-k over a vocabulary index, including a saved and
//! reloaded copy.

use revdict::data::TargetKind;
use revdict::retrieval::{build_index, VocabIndex};
use revdict::synth::{SynthCorpus, SynthSpec};

fn main() -> revdict::Result<()> {
    let corpus = SynthCorpus::generate(SynthSpec::default())?;
    let index = build_index(&corpus.train, TargetKind::Sgns)?;
    println!("{} words, {}-d", index.len(), index.dim());

    let probe = &corpus.train.entries()[42];
    println!("query: embedding of `{}` ({})", probe.word, probe.gloss);
    for hit in index.lookup(probe.sgns.as_deref().unwrap(), 5)? {
        println!("  {:<12} {:<10} {:.3}", hit.id, hit.word, hit.score);
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("vocab.rdix");
    index.save(&path)?;
    let again = VocabIndex::load(&path)?;
    assert_eq!(
        again.lookup(probe.sgns.as_deref().unwrap(), 5)?,
        index.lookup(probe.sgns.as_deref().unwrap(), 5)?
    );
    println!("reloaded index answers identically");
    Ok(())
}
