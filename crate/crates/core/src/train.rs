//! Shared minibatch regression loop: seeded shuffling, MSE + backprop,
//! AdamW under the one-cycle schedule, and per-epoch dev checkpointing on
//! mean cosine.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean_row_cosine, mse_grad, mse_loss, FeedForwardStack, Matrix};
use crate::optim::{AdamW, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean of the minibatch losses.
    pub train_loss: f64,
    pub dev_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub best_epoch: usize,
    pub best_dev_cosine: f64,
    pub steps: usize,
    pub history: Vec<EpochRecord>,
}

pub(crate) struct Fitted {
    pub stack: FeedForwardStack,
    pub summary: TrainingSummary,
}

/// Extra MSE term pulling outputs towards the inputs (requires
/// `d_in == d_out`).
pub(crate) struct Reconstruction {
    pub weight: f64,
}

pub(crate) struct Problem<'a> {
    pub train_x: &'a Matrix,
    pub train_y: &'a Matrix,
    pub dev_x: &'a Matrix,
    pub dev_y: &'a Matrix,
}

pub(crate) fn fit(
    mut stack: FeedForwardStack,
    data: Problem<'_>,
    cfg: &TrainConfig,
    recon: Option<Reconstruction>,
) -> Result<Fitted> {
    cfg.validate()?;
    let n = data.train_x.rows();
    if n == 0 || data.dev_x.rows() == 0 {
        return Err(Error::InvalidArgument(
            "training and dev sets must be nonempty".into(),
        ));
    }
    if data.train_y.rows() != n || data.dev_y.rows() != data.dev_x.rows() {
        return Err(Error::shape(
            "fit",
            "one target row per feature row",
            format!(
                "train {}/{}, dev {}/{}",
                n,
                data.train_y.rows(),
                data.dev_x.rows(),
                data.dev_y.rows()
            ),
        ));
    }
    for (name, x, y) in [
        ("train", data.train_x, data.train_y),
        ("dev", data.dev_x, data.dev_y),
    ] {
        if x.cols() != stack.d_in() || y.cols() != stack.d_out() {
            return Err(Error::shape(
                "fit",
                format!("{name} dims {}→{}", stack.d_in(), stack.d_out()),
                format!("{}→{}", x.cols(), y.cols()),
            ));
        }
    }
    let recon = recon.filter(|r| r.weight != 0.0);
    if recon.is_some() && stack.d_in() != stack.d_out() {
        return Err(Error::InvalidArgument(
            "reconstruction loss needs equal input and output dims".into(),
        ));
    }

    let schedule = cfg.schedule(n)?;
    let mut opt = AdamW::new(&stack.param_sizes());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(FeedForwardStack, usize, f64)> = None;

    stack.set_training(true);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = data.train_x.select_rows(idx);
            let y = data.train_y.select_rows(idx);
            let pred = stack.forward(&x)?;
            let mut loss = mse_loss(&pred, &y)?;
            let mut grad = mse_grad(&pred, &y)?;
            if let Some(r) = &recon {
                loss += r.weight * mse_loss(&pred, &x)?;
                let g2 = mse_grad(&pred, &x)?;
                for (g, extra) in grad.as_mut_slice().iter_mut().zip(g2.as_slice()) {
                    *g += r.weight * extra;
                }
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss is {loss} at epoch {epoch}, batch {}",
                    batch_no + 1
                )));
            }
            loss_sum += loss * idx.len() as f64;
            let grads = stack.backward(&grad)?;
            let lr = schedule.lr_at(step)?;
            opt.step(
                &mut stack.params_mut(),
                &grads.slices(),
                lr,
                cfg.weight_decay,
            )
            .map_err(|e| match e {
                Error::NonFinite(m) => {
                    Error::NonFinite(format!("{m} (epoch {epoch}, batch {})", batch_no + 1))
                }
                other => other,
            })?;
            step += 1;
        }

        let dev_pred = stack.infer(data.dev_x)?;
        let dev_cosine = mean_row_cosine(&dev_pred, data.dev_y)?;
        let train_loss = loss_sum / n as f64;
        log::debug!("epoch {epoch}: loss {train_loss:.6e}, dev cosine {dev_cosine:.6}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            dev_cosine,
        });
        if best.as_ref().is_none_or(|(_, _, c)| dev_cosine > *c) {
            let mut snap = stack.clone();
            snap.set_training(false);
            best = Some((snap, epoch, dev_cosine));
        }
    }
    stack.set_training(false);

    let (stack, best_epoch, best_dev_cosine) = match best {
        Some(b) => b,
        None => unreachable!("epochs ≥ 1 always records a checkpoint"),
    };
    Ok(Fitted {
        stack,
        summary: TrainingSummary {
            best_epoch,
            best_dev_cosine,
            steps: step,
            history,
        },
    })
}
