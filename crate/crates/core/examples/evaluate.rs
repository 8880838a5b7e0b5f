//! Scores noisy predictions with the full metric suite and prints a
//! results table.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use revdict::data::TargetKind;
use revdict::eval::{format_report, full_report, PairedReport};
use revdict::math::Matrix;
use revdict::retrieval::build_index_from;
use revdict::synth::{SynthCorpus, SynthSpec};

fn main() -> revdict::Result<()> {
    let corpus = SynthCorpus::generate(SynthSpec::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let index_all = |kind| {
        build_index_from(
            corpus
                .train
                .entries()
                .iter()
                .chain(corpus.dev.entries())
                .chain(corpus.test.entries()),
            kind,
        )
    };

    let mut rows = BTreeMap::new();
    for kind in TargetKind::ALL {
        let index = index_all(kind)?;
        let mut pair = PairedReport::default();
        for (split, set) in [("test", &corpus.test), ("dev", &corpus.dev)] {
            let gold: Vec<&[f64]> = set
                .entries()
                .iter()
                .map(|e| e.target(kind).unwrap())
                .collect();
            let targets = Matrix::from_rows(&gold)?;
            // gold plus noise stands in for a model's output
            let noisy: Vec<Vec<f64>> = gold
                .iter()
                .map(|g| g.iter().map(|v| v + rng.gen_range(-0.6..0.6)).collect())
                .collect();
            let preds = Matrix::from_rows(&noisy)?;
            let ids: Vec<&str> = set.entries().iter().map(|e| e.id.as_str()).collect();
            let report = full_report(&preds, &targets, &ids, &index)?;
            match split {
                "test" => pair.test = Some(report),
                _ => pair.dev = Some(report),
            }
        }
        rows.insert(("Subtask 1".to_string(), kind), pair);
    }
    print!("{}", format_report(&rows));
    Ok(())
}
