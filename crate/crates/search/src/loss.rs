//! Architecture regularizers and the per-cell total loss.

use ddarts_autodiff::{Graph, Var};
use ddarts_core::parse::sigmoid;
use ddarts_core::AlphaTable;

/// Weights of the zero-one and ablation terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub w01: f64,
    pub wab: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { w01: 7.0, wab: 0.5 }
    }
}

/// `-(1/n) * sum (sigmoid(a) - 0.5)^2` over the given logits; 0 for none.
pub fn zero_one_of(logits: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for a in logits {
        let d = sigmoid(a) - 0.5;
        sum += d * d;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        -sum / n as f64
    }
}

/// Zero-one loss over every distinct logit of the table.
pub fn zero_one_loss(alpha: &AlphaTable) -> f64 {
    zero_one_of(alpha.logits())
}

/// Zero-one loss of graph tensors taken together as one logit set.
pub fn zero_one_loss_var(g: &mut Graph, tables: &[Var]) -> Var {
    let n: usize = tables.iter().map(|&t| g.value(t).len()).sum();
    let sums: Vec<Var> = tables
        .iter()
        .map(|&t| {
            let s = g.sigmoid(t);
            let centred = g.add_scalar(s, -0.5);
            let sq = g.square(centred);
            g.sum(sq)
        })
        .collect();
    let total = g.add_n(&sums);
    g.mul_scalar(total, -1.0 / n as f64)
}

pub fn fair_loss_from(ce: f64, l01: f64, cfg: &LossConfig) -> f64 {
    ce + cfg.w01 * l01
}

pub fn fair_loss(ce: f64, alpha: &AlphaTable, cfg: &LossConfig) -> f64 {
    fair_loss_from(ce, zero_one_loss(alpha), cfg)
}

/// `(mc[i] - mean) / mean`, or 0 when the mean is exactly 0.
pub fn ablation_loss(mc: &[f64], i: usize) -> f64 {
    let n = mc.len() as f64;
    let mean = mc.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    // Summing differences keeps equal contributions at exactly zero.
    let deviation = mc.iter().map(|m| mc[i] - m).sum::<f64>() / n;
    deviation / mean
}

pub fn ablation_losses(mc: &[f64]) -> Vec<f64> {
    (0..mc.len()).map(|i| ablation_loss(mc, i)).collect()
}

pub fn total_loss_from(ce: f64, l01: f64, l_ab: f64, cfg: &LossConfig) -> f64 {
    ce + cfg.w01 * l01 + cfg.wab * l_ab
}

/// Loss of cell `i`: the zero-one term covers only that cell's own table.
pub fn total_loss(ce: f64, alpha_i: &[Vec<f64>], mc: &[f64], i: usize, cfg: &LossConfig) -> f64 {
    total_loss_from(ce, zero_one_of(alpha_i.iter().flatten().copied()), ablation_loss(mc, i), cfg)
}

/// Fractions of logits with `sigmoid > 0.9` and with `sigmoid < 0.1`.
pub fn dominant_fraction(alpha: &AlphaTable) -> (f64, f64) {
    let (mut above, mut below, mut n) = (0usize, 0usize, 0usize);
    for a in alpha.logits() {
        let s = sigmoid(a);
        above += (s > 0.9) as usize;
        below += (s < 0.1) as usize;
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    (above as f64 / n as f64, below as f64 / n as f64)
}
