//! AdamW with decoupled weight decay, the cosine one-cycle learning-rate
//! schedule, and the training hyperparameter bundle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Moment accumulators for a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamW {
    /// One accumulator pair per parameter tensor, sized by `sizes`.
    pub fn new(sizes: &[usize]) -> Self {
        AdamW {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update:
    ///
    /// ```text
    /// m ← β1·m + (1−β1)·g
    /// v ← β2·v + (1−β2)·g²
    /// θ ← θ − lr·( m̂ / (√v̂ + ε) + wd·θ )
    /// ```
    ///
    /// Gradients are checked for finiteness before anything is mutated.
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::shape(
                "AdamW::step",
                format!("{} tensors", self.first.len()),
                format!("{} params / {} grads", params.len(), grads.len()),
            ));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.first).enumerate() {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::shape(
                    "AdamW::step",
                    format!("tensor {i} of length {}", m.len()),
                    format!("param {} / grad {}", p.len(), g.len()),
                ));
            }
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient tensor {i} element {j} is {} at optimizer step {}",
                    g[j],
                    self.step + 1
                )));
            }
        }
        if lr.is_nan() || lr <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * p[k]);
            }
        }
        Ok(())
    }
}

/// Warm-up then anneal schedule, both phases half-cosine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneCycle {
    pub max_lr: f64,
    pub pct_start: f64,
    pub div_initial: f64,
    pub div_final: f64,
    pub total_steps: usize,
}

impl OneCycle {
    pub fn new(
        max_lr: f64,
        pct_start: f64,
        div_initial: f64,
        div_final: f64,
        total_steps: usize,
    ) -> Result<Self> {
        let s = OneCycle {
            max_lr,
            pct_start,
            div_initial,
            div_final,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.max_lr > 0.0 && self.max_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "max_lr must be > 0, got {}",
                self.max_lr
            )));
        }
        if !(self.pct_start > 0.0 && self.pct_start < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pct_start must lie in (0, 1), got {}",
                self.pct_start
            )));
        }
        if !(self.div_initial > 1.0 && self.div_final > 1.0) {
            return Err(Error::InvalidArgument(
                "schedule divisors must be > 1".into(),
            ));
        }
        if self.total_steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "one-cycle schedule needs at least 2 steps, got {}",
                self.total_steps
            )));
        }
        Ok(())
    }

    pub fn initial_lr(&self) -> f64 {
        self.max_lr / self.div_initial
    }

    pub fn final_lr(&self) -> f64 {
        self.initial_lr() / self.div_final
    }

    /// Step index at which the peak is reached: `round(pct_start · T)`,
    /// clamped into `[1, T − 1]` so both phases are nonempty.
    pub fn peak_step(&self) -> usize {
        let raw = (self.pct_start * self.total_steps as f64).round() as usize;
        raw.clamp(1, self.total_steps - 1)
    }

    /// Learning rate at `step ∈ [0, T]`. Within a phase running from `a` to
    /// `b` with progress `p ∈ [0, 1]`: `lr = b + (a − b)(1 + cos πp)/2`.
    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::InvalidArgument(format!(
                "schedule step {step} outside [0, {}]",
                self.total_steps
            )));
        }
        let peak = self.peak_step();
        let (a, b, p) = if step <= peak {
            (self.initial_lr(), self.max_lr, step as f64 / peak as f64)
        } else {
            (
                self.max_lr,
                self.final_lr(),
                (step - peak) as f64 / (self.total_steps - peak) as f64,
            )
        };
        Ok(cosine_interp(a, b, p))
    }
}

#[inline]
fn cosine_interp(a: f64, b: f64, p: f64) -> f64 {
    b + (a - b) * (1.0 + (std::f64::consts::PI * p).cos()) / 2.0
}

/// Training hyperparameters. Defaults:
/// batch 100, 20 epochs, AdamW with weight decay 1e-4, one-cycle peak
/// 1e-4 with 20% warm-up and divisors 25 / 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub max_lr: f64,
    pub pct_start: f64,
    pub div_initial: f64,
    pub div_final: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            epochs: 20,
            weight_decay: 1.0e-4,
            max_lr: 1.0e-4,
            pct_start: 0.2,
            div_initial: 25.0,
            div_final: 100.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be ≥ 1".into()));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("weight_decay must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, train_size: usize) -> usize {
        train_size.div_ceil(self.batch_size)
    }

    /// `T = epochs · ceil(train_size / batch_size)`.
    pub fn total_steps(&self, train_size: usize) -> usize {
        self.epochs * self.steps_per_epoch(train_size)
    }

    pub fn schedule(&self, train_size: usize) -> Result<OneCycle> {
        OneCycle::new(
            self.max_lr,
            self.pct_start,
            self.div_initial,
            self.div_final,
            self.total_steps(train_size),
        )
    }
}
