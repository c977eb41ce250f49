//! Minibatch training: an Adam phase followed by SGD with rate halving.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Dropout, NmtParams};
use crate::error::{Error, Result};

/// Source and target id sequences, end-of-sentence not included.
pub type Pair = (Vec<usize>, Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub adam_epochs: usize,
    pub sgd_epochs: usize,
    pub adam_lr: f64,
    pub sgd_lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            adam_epochs: 3,
            sgd_epochs: 6,
            adam_lr: 0.001,
            sgd_lr: 0.1,
            batch_size: 16,
            dropout: 0.2,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl Schedule {
    pub fn full() -> Self {
        Self {
            batch_size: 128,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        for (name, v) in [("adam_lr", self.adam_lr), ("sgd_lr", self.sgd_lr), ("clip_norm", self.clip_norm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Sgd,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Adam => "adam",
            Optimizer::Sgd => "sgd",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    /// Mean per-token negative log-likelihood over the epoch's batches.
    pub train_loss: f64,
    pub dev_perplexity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Per-token loss of every batch in order.
    pub batch_losses: Vec<f64>,
    pub epochs: Vec<EpochReport>,
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&format!(
                "epoch={} optimizer={} lr={} train_loss={:.6} dev_ppl={:.6}\n",
                e.epoch, e.optimizer, e.learning_rate, e.train_loss, e.dev_perplexity
            ));
        }
        for (i, l) in self.batch_losses.iter().enumerate() {
            out.push_str(&format!("batch={i} loss={l:.6}\n"));
        }
        out
    }
}

/// `exp` of the mean per-token negative log-likelihood, end-of-sentence included.
pub fn perplexity(params: &NmtParams, pairs: &[Pair]) -> Result<f64> {
    let mut nll = 0.0;
    let mut tokens = 0usize;
    for (s, t) in pairs {
        nll += params.loss(s, t)?;
        tokens += t.len() + 1;
    }
    if tokens == 0 {
        return Err(Error::validation("perplexity of an empty set"));
    }
    Ok((nll / tokens as f64).exp())
}

struct Adam {
    m: NmtParams,
    v: NmtParams,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut NmtParams, grad: &NmtParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let grads = grad.tensors();
        for (((p, (_, g)), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = Self::B1 * m.data[i] + (1.0 - Self::B1) * gi;
                v.data[i] = Self::B2 * v.data[i] + (1.0 - Self::B2) * gi * gi;
                p.data[i] -= lr * (m.data[i] / c1) / ((v.data[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn sgd_step(params: &mut NmtParams, grad: &NmtParams, lr: f64) {
    for (p, (_, g)) in params.tensors_mut().into_iter().zip(grad.tensors()) {
        for (pi, gi) in p.data.iter_mut().zip(&g.data) {
            *pi -= lr * gi;
        }
    }
}

fn clip(grad: &mut NmtParams, max_norm: f64) {
    let norm = grad
        .tensors()
        .iter()
        .flat_map(|(_, m)| m.data.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for m in grad.tensors_mut() {
            m.data.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Trains in place. Perplexity is tracked on `dev`, or on `corpus` when `dev` is empty.
pub fn train(params: &mut NmtParams, corpus: &[Pair], dev: &[Pair], schedule: &Schedule) -> Result<TrainReport> {
    train_with_progress(params, corpus, dev, schedule, |_| {})
}

pub fn train_with_progress(
    params: &mut NmtParams,
    corpus: &[Pair],
    dev: &[Pair],
    schedule: &Schedule,
    mut progress: impl FnMut(&EpochReport),
) -> Result<TrainReport> {
    schedule.validate()?;
    if corpus.is_empty() {
        return Err(Error::validation("training corpus is empty"));
    }
    for (s, t) in corpus.iter().chain(dev) {
        params.check_source(s)?;
        params.check_target(t)?;
    }
    let monitor = if dev.is_empty() { corpus } else { dev };
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut grad = params.zeros_like();
    let mut adam = Adam {
        m: params.zeros_like(),
        v: params.zeros_like(),
        t: 0,
    };
    let mut report = TrainReport::default();
    let mut sgd_lr = schedule.sgd_lr;
    let mut last_ppl = f64::INFINITY;
    let total = schedule.adam_epochs + schedule.sgd_epochs;
    for epoch in 0..total {
        let optimizer = if epoch < schedule.adam_epochs { Optimizer::Adam } else { Optimizer::Sgd };
        let lr = match optimizer {
            Optimizer::Adam => schedule.adam_lr,
            Optimizer::Sgd => sgd_lr,
        };
        order.shuffle(&mut rng);
        let (mut epoch_nll, mut epoch_tokens) = (0.0, 0usize);
        for batch in order.chunks(schedule.batch_size) {
            for m in grad.tensors_mut() {
                m.fill(0.0);
            }
            let scale = 1.0 / batch.len() as f64;
            let (mut nll, mut tokens) = (0.0, 0usize);
            for &i in batch {
                let (s, t) = &corpus[i];
                let mut dropout = Dropout::new(schedule.dropout, &mut rng);
                nll += params.loss_and_gradient(s, t, &mut dropout, scale, &mut grad)?;
                tokens += t.len() + 1;
            }
            let loss = nll / tokens as f64;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    batch: report.batch_losses.len(),
                });
            }
            report.batch_losses.push(loss);
            epoch_nll += nll;
            epoch_tokens += tokens;
            clip(&mut grad, schedule.clip_norm);
            match optimizer {
                Optimizer::Adam => adam.step(params, &grad, lr),
                Optimizer::Sgd => sgd_step(params, &grad, lr),
            }
        }
        let ppl = perplexity(params, monitor)?;
        if optimizer == Optimizer::Sgd && ppl > last_ppl {
            sgd_lr /= 2.0;
        }
        last_ppl = ppl;
        let e = EpochReport {
            epoch: epoch + 1,
            optimizer,
            learning_rate: lr,
            train_loss: epoch_nll / epoch_tokens as f64,
            dev_perplexity: ppl,
        };
        progress(&e);
        report.epochs.push(e);
    }
    Ok(report)
}
