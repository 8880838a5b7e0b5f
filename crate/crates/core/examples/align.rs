//! Learns the map from a source-language embedding space onto the target
//! space with the bottleneck aligner.

use revdict::align::{train_aligner, AlignerAE, AlignerConfig};
use revdict::data::AlignedPair;
use revdict::math::mean_row_cosine;
use revdict::optim::TrainConfig;
use revdict::synth::{SynthCorpus, SynthSpec};

fn main() -> revdict::Result<()> {
    let corpus = SynthCorpus::generate(SynthSpec::default())?;
    let pairs = |rows: &[revdict::data::MappedEntry]| -> Vec<AlignedPair> {
        rows.iter()
            .map(|m| AlignedPair {
                src_id: m.src_id.clone(),
                tgt_id: m.tgt_id.clone(),
                src_embedding: corpus.source.get(&m.src_id).unwrap().sgns.clone().unwrap(),
                tgt_embedding: m.sgns.clone().unwrap(),
            })
            .collect()
    };
    let train = pairs(&corpus.mapped_train);
    let dev = pairs(&corpus.mapped_dev);

    let d = corpus.spec.d_sgns;
    let config = AlignerConfig {
        d_in: d,
        hidden: 4 * d,
        bottleneck: d,
        d_out: d,
        seed: 3,
        ..AlignerConfig::default()
    };
    let cfg = TrainConfig {
        max_lr: 1e-2,
        ..TrainConfig::default()
    };
    let (dx, dy) = revdict::data::pair_matrices(&dev)?;
    println!(
        "identity baseline: dev cosine {:.4}",
        mean_row_cosine(&dx, &dy)?
    );
    let trained = train_aligner(AlignerAE::init(config)?, &train, &dev, &cfg)?;
    println!(
        "aligner: dev cosine {:.4} (epoch {})",
        trained.summary.best_dev_cosine, trained.summary.best_epoch
    );
    let code = trained.aligner.encode(&dx)?;
    println!("bottleneck codes: {} x {}", code.rows(), code.cols());
    Ok(())
}
