//! Training a fixed genotype from scratch, used for retraining searched
//! architectures and by the operation benchmark.

use ddarts_autodiff::Graph;
use ddarts_core::Genotype;

use crate::data::Dataset;
use crate::engine::{count_correct, epoch_batches};
use crate::error::SearchError;
use crate::network::{Arch, Network};
use crate::optim::{clip_grad_norm, cosine_lr, Sgd};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub channels: usize,
    pub lr: f64,
    pub lr_min: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            channels: 4,
            lr: 0.05,
            lr_min: 0.001,
            momentum: 0.9,
            weight_decay: 3e-4,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub train_loss: Vec<f64>,
    /// Validation top-1 after each epoch.
    pub val_top1: Vec<f64>,
}

impl TrainOutcome {
    pub fn best_val_top1(&self) -> Option<f64> {
        self.val_top1.iter().copied().reduce(f64::max)
    }

    pub fn final_val_top1(&self) -> Option<f64> {
        self.val_top1.last().copied()
    }
}

/// Trains `genotype` on `train` with momentum SGD and cosine decay and
/// evaluates on `val` after every epoch.
pub fn train_discrete(
    genotype: &Genotype,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, SearchError> {
    if train.is_empty() || val.is_empty() {
        return Err(SearchError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(SearchError::Config("batch size must be positive".into()));
    }
    let (c, _, _) = train.image_shape();
    let mut net = Network::discrete(genotype, c, train.classes, cfg.channels, cfg.seed)?;
    let mut opt = Sgd::new(net.params(), cfg.momentum, cfg.weight_decay);
    let mut out = TrainOutcome { train_loss: Vec::new(), val_top1: Vec::new() };
    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg.lr, cfg.lr_min, epoch, cfg.epochs);
        let mut total = 0.0;
        for batch in epoch_batches(train.len(), cfg.batch_size, cfg.seed, epoch, 3) {
            let (x, y) = train.batch(&batch);
            let mut g = Graph::new();
            let p = net.params().bind(&mut g, true);
            let xv = g.constant(x);
            let logits = net.forward(&mut g, &p, xv, Arch::Fixed, None)?;
            let loss = g.cross_entropy(logits, &y)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(SearchError::Divergence { epoch, what: "training loss", value });
            }
            total += value * batch.len() as f64;
            g.backward(loss);
            let mut grads = p.grads(&g, net.params());
            clip_grad_norm(&mut grads, cfg.grad_clip);
            opt.step(net.params_mut(), &grads, lr);
        }
        out.train_loss.push(total / train.len() as f64);
        out.val_top1.push(accuracy(&net, val, cfg.batch_size)?);
    }
    Ok(out)
}

/// Top-1 accuracy of a discrete network.
pub fn accuracy(net: &Network, data: &Dataset, batch_size: usize) -> Result<f64, SearchError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = data.batch(chunk);
        let mut g = Graph::new();
        let p = net.params().bind(&mut g, false);
        let xv = g.constant(x);
        let logits = net.forward(&mut g, &p, xv, Arch::Fixed, None)?;
        correct += count_correct(g.value(logits), &y);
    }
    Ok(correct as f64 / data.len() as f64)
}
