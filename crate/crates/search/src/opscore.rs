//! Operation benchmark: every operation is placed alone on every edge of a
//! small proxy network, the proxy is trained, and the operation's score is
//! the median over edges of the best validation accuracy.

use ddarts_core::genotype::{default_reduction_positions, CellSpec};
use ddarts_core::{CellKind, Genotype, OpKind, SearchSpace};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::SearchError;
use crate::train::{train_discrete, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct OpScoreConfig {
    pub runs: usize,
    /// Training settings; `epochs` and `seed` apply to every run.
    pub train: TrainConfig,
}

impl Default for OpScoreConfig {
    fn default() -> Self {
        OpScoreConfig { runs: 1, train: TrainConfig { epochs: 3, ..TrainConfig::default() } }
    }
}

/// Three residual-block cells of two nodes in the extended space: both
/// inputs feed node 2 through a 3x3 convolution, node 3 stacks a second
/// convolution on node 2 with identity shortcuts from the inputs.
pub fn default_proxy() -> Genotype {
    let k = SearchSpace::Extended.op_count();
    let reductions = default_reduction_positions(3);
    let cells = (0..3)
        .map(|i| {
            let kind = if reductions.contains(&i) { CellKind::Reduction } else { CellKind::Normal };
            let mut cell = CellSpec::empty(2, kind, k);
            for edge in &mut cell.edges {
                let op = if edge.to_node == 3 && edge.from_node < 2 { OpKind::SkipConnect } else { OpKind::SimpleConv3x3 };
                edge.selected[op.ordinal()] = true;
            }
            cell
        })
        .collect();
    let mut g = Genotype {
        search_space: SearchSpace::Extended,
        steps: 2,
        cells,
        reduction_positions: reductions,
        share_groups: Vec::new(),
    };
    g.group_identical_cells();
    g
}

/// The proxy with edge `edge` of every cell holding only `op`.
pub fn isolate(proxy: &Genotype, edge: usize, op: OpKind) -> Genotype {
    let mut g = proxy.clone();
    for cell in &mut g.cells {
        let e = &mut cell.edges[edge];
        e.selected.iter_mut().for_each(|s| *s = false);
        e.selected[op.ordinal()] = true;
    }
    g
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn job_seed(master: u64, op: OpKind, edge: usize, run: usize) -> u64 {
    let mut x = master ^ ((op.ordinal() as u64) << 48) ^ ((edge as u64) << 24) ^ run as u64;
    // splitmix64 finalizer
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Scores for every operation of the proxy's space, in ordinal order.
/// Untrained runs (`epochs == 0`) score chance accuracy `1 / classes`.
pub fn op_scores(proxy: &Genotype, data: &Dataset, cfg: &OpScoreConfig) -> Result<Vec<(OpKind, f64)>, SearchError> {
    proxy.validate()?;
    if cfg.runs == 0 {
        return Err(SearchError::Config("opscore needs at least one run".into()));
    }
    let (train, val) = data.split_halves();
    let ops = proxy.search_space.ops();
    let edges = proxy.cells[0].edges.len();
    let jobs: Vec<(OpKind, usize, usize)> = ops
        .iter()
        .flat_map(|&op| (0..edges).flat_map(move |e| (0..cfg.runs).map(move |r| (op, e, r))))
        .collect();
    let chance = 1.0 / data.classes as f64;
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(op, edge, run)| {
            if cfg.train.epochs == 0 {
                return Ok(chance);
            }
            let tc = TrainConfig { seed: job_seed(cfg.train.seed, op, edge, run), ..cfg.train.clone() };
            let out = train_discrete(&isolate(proxy, edge, op), &train, &val, &tc)?;
            Ok(out.best_val_top1().unwrap_or(chance))
        })
        .collect::<Result<_, SearchError>>()?;
    Ok(ops
        .iter()
        .enumerate()
        .map(|(i, &op)| {
            let mut per_edge: Vec<f64> = (0..edges)
                .map(|e| {
                    let start = (i * edges + e) * cfg.runs;
                    results[start..start + cfg.runs].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            (op, median(&mut per_edge))
        })
        .collect())
}

pub fn scores_csv(scores: &[(OpKind, f64)]) -> String {
    let mut out = String::from("op,score\n");
    for (op, s) in scores {
        out.push_str(&format!("{},{s}\n", op.name()));
    }
    out
}
