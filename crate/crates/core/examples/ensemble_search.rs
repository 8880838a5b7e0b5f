//! Trains four heads and scores all fifteen ensembles on the dev split.

use revdict::data::{join, TargetKind};
use revdict::ensemble::{subset_search, Candidate, DevTargets};
use revdict::optim::TrainConfig;
use revdict::projection::{train_head, HeadSpec, ProjectionHead};
use revdict::synth::{SynthCorpus, SynthSpec, ENCODERS};

fn main() -> revdict::Result<()> {
    let corpus = SynthCorpus::generate(SynthSpec::default())?;
    let kind = TargetKind::Electra;
    let cfg = TrainConfig {
        max_lr: 1e-2,
        ..TrainConfig::default()
    };

    let mut candidates = Vec::new();
    let mut dev_targets = None;
    for (i, name) in ENCODERS.iter().enumerate() {
        let store = &corpus.features[*name];
        let train = join(&corpus.train, store, kind)?;
        let dev = join(&corpus.dev, store, kind)?;
        let spec = HeadSpec::new(store.dim(), train.targets.cols(), kind, *name).seed(i as u64);
        let head = train_head(ProjectionHead::init(&spec)?, &train, &dev, &cfg)?;
        candidates.push(Candidate {
            name: name.to_string(),
            predictions: head.predict(&dev.features)?,
        });
        dev_targets.get_or_insert_with(|| DevTargets {
            pool: dev.targets.clone(),
            target_pool_indices: (0..dev.len()).collect(),
            targets: dev.targets,
        });
    }

    let result = subset_search(&candidates, &dev_targets.expect("four heads"))?;
    result.write_csv(std::io::stdout())?;
    let best = result.best();
    println!(
        "\nselected {:?}: cosine {:.4}",
        best.members, best.report.cosine
    );
    Ok(())
}
