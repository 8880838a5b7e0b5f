//! Fits one projection head on synthetic features and round-trips the
//! checkpoint.

use revdict::data::{join, TargetKind};
use revdict::optim::TrainConfig;
use revdict::projection::{train_head, HeadSpec, ProjectionHead, TrainedHead};
use revdict::synth::{SynthCorpus, SynthSpec};

fn main() -> revdict::Result<()> {
    let corpus = SynthCorpus::generate(SynthSpec::default())?;
    let store = &corpus.features["camel"];
    let train = join(&corpus.train, store, TargetKind::Electra)?;
    let dev = join(&corpus.dev, store, TargetKind::Electra)?;

    let spec = HeadSpec::new(
        store.dim(),
        train.targets.cols(),
        TargetKind::Electra,
        "camel",
    )
    .seed(1);
    // the default schedule peaks at 1e-4; this toy set needs a hotter one
    let cfg = TrainConfig {
        max_lr: 1e-2,
        ..TrainConfig::default()
    };
    let head = train_head(ProjectionHead::init(&spec)?, &train, &dev, &cfg)?;

    println!("epoch  train_loss  dev_cosine");
    for r in &head.summary.history {
        println!(
            "{:>5}  {:>10.6}  {:>10.4}",
            r.epoch, r.train_loss, r.dev_cosine
        );
    }
    println!(
        "kept epoch {} (dev cosine {:.4}) after {} steps",
        head.summary.best_epoch, head.summary.best_dev_cosine, head.summary.steps
    );

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("camel-electra.ckpt.json");
    head.save(&path)?;
    let back = TrainedHead::load(&path)?;
    assert_eq!(back.predict(&dev.features)?, head.predict(&dev.features)?);
    println!("checkpoint round trip is exact");
    Ok(())
}
