//! The bi-level search loop.
//!
//! Every step first updates the architecture logits on a validation batch,
//! one Adam optimizer per share group, then the supernet weights on a
//! training batch with momentum SGD. In the distributed modes each group
//! minimizes its own cells' total loss
//! `L_CE + w01 * L01(own table) + wab * L_AB^i`, where the ablation term
//! needs the loss of the supernet with each cell bypassed in turn.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ddarts_autodiff::{Binding, Graph, Tensor, Var};
use ddarts_core::genotype::{default_reduction_positions, singleton_groups};
use ddarts_core::metric::{metric_m, plateau_stop, DistanceTrace, HammingWeights, PlateauRule};
use ddarts_core::{genotype_to_alpha, parse_alpha, AlphaTable, Genotype, ParseMethod, SearchSpace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::SearchError;
use crate::loss::{zero_one_loss, zero_one_loss_var, LossConfig};
use crate::network::{Arch, Network, NetworkSpec};
use crate::optim::{clip_grad_norm, cosine_lr, Adam, Sgd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Per-cell sigmoid logits trained on the per-cell total loss.
    Ddarts,
    /// As `Ddarts`, warm-started from a genotype with weight-only pretraining,
    /// shared tables for identical cells and plateau early stopping.
    Dartopti,
    /// Softmax mixing trained on cross-entropy alone.
    Darts,
    /// Sigmoid mixing trained on cross-entropy plus the zero-one loss over all logits.
    Fairdarts,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Ddarts, Mode::Dartopti, Mode::Darts, Mode::Fairdarts];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ddarts => "ddarts",
            Mode::Dartopti => "dartopti",
            Mode::Darts => "darts",
            Mode::Fairdarts => "fairdarts",
        }
    }

    fn softmax(self) -> bool {
        self == Mode::Darts
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?} (expected ddarts, dartopti, darts or fairdarts)"))
    }
}

/// Which cells share one logit table and optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharePolicy {
    PerCell,
    /// One table for the whole network.
    Single,
    /// The starting genotype's share groups.
    Genotype,
}

impl FromStr for SharePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-cell" => Ok(SharePolicy::PerCell),
            "single" => Ok(SharePolicy::Single),
            "genotype" => Ok(SharePolicy::Genotype),
            _ => Err(format!("unknown share policy {s:?} (expected per-cell, single or genotype)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub parse_method: ParseMethod,
    pub threshold: f64,
    pub channels: usize,
    pub cells: usize,
    pub steps: usize,
    /// Ignored in dartopti mode, which uses the starting genotype's space.
    pub search_space: SearchSpace,
    pub weight_lr: f64,
    pub weight_lr_min: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub alpha_lr: f64,
    pub alpha_betas: (f64, f64),
    pub alpha_weight_decay: f64,
    /// Standard deviation of the initial logits when not warm-started.
    pub alpha_init_scale: f64,
    /// Weight-only epochs at the start of a dartopti search.
    pub pretrain_epochs: usize,
    /// Warm-start logit magnitude: selected ops get `+warm_logit`, others `-warm_logit`.
    pub warm_logit: f64,
    pub plateau: PlateauRule,
    pub early_stop: bool,
    /// `None` picks the mode's default: the genotype's groups in dartopti, one table per cell otherwise.
    pub share: Option<SharePolicy>,
    /// Record wall-clock epoch durations. Off by default so logs are byte-reproducible.
    pub timing: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: Mode::Ddarts,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            loss: LossConfig::default(),
            parse_method: ParseMethod::Edge,
            threshold: ddarts_core::DEFAULT_THRESHOLD,
            channels: 4,
            cells: 8,
            steps: ddarts_core::genotype::DEFAULT_STEPS,
            search_space: SearchSpace::Darts,
            weight_lr: 0.025,
            weight_lr_min: 0.001,
            momentum: 0.9,
            weight_decay: 3e-4,
            grad_clip: 5.0,
            alpha_lr: 3e-4,
            alpha_betas: (0.5, 0.999),
            alpha_weight_decay: 1e-3,
            alpha_init_scale: 1e-3,
            pretrain_epochs: 5,
            warm_logit: 3.0,
            plateau: PlateauRule::default(),
            early_stop: true,
            share: None,
            timing: false,
        }
    }
}

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_top1: f64,
    pub l01: f64,
    pub mean_mc: f64,
    pub distance_du: f64,
    pub epoch_seconds: f64,
}

pub const METRICS_HEADER: &str = "epoch,train_loss,val_loss,val_top1,l01,mean_mc,distance_du,epoch_seconds";

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.epoch, r.train_loss, r.val_loss, r.val_top1, r.l01, r.mean_mc, r.distance_du, r.epoch_seconds
        ));
    }
    out
}

/// Everything a search mutates.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub config: SearchConfig,
    pub network: Network,
    pub alpha: AlphaTable,
    alpha_opts: Vec<Adam>,
    weight_opt: Sgd,
    /// Number of completed epochs.
    pub epoch: usize,
    pub trace: DistanceTrace,
    pub start: Genotype,
    pub train_len: usize,
    pub val_len: usize,
}

impl SearchState {
    /// Builds the supernet and logits. `start` is required in dartopti mode
    /// and supplies the layout; otherwise the layout comes from the config.
    pub fn new(config: &SearchConfig, start: Option<&Genotype>, data: &Dataset) -> Result<Self, SearchError> {
        if data.len() < 2 {
            return Err(SearchError::EmptyDataset);
        }
        if config.batch_size == 0 {
            return Err(SearchError::Config("batch size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (layout, alpha) = match (config.mode, start) {
            (Mode::Dartopti, None) => {
                return Err(SearchError::Config("dartopti mode needs a starting genotype".into()));
            }
            (Mode::Dartopti, Some(g)) => {
                let mut layout = g.clone();
                apply_share(&mut layout, config.share.unwrap_or(SharePolicy::Genotype));
                let mut alpha = genotype_to_alpha(g, config.warm_logit, -config.warm_logit)?;
                if layout.share_groups != g.share_groups {
                    alpha = regroup(&alpha, &layout.share_groups);
                }
                (layout, alpha)
            }
            (_, start) => {
                let mut layout = match start {
                    Some(g) => g.clone(),
                    None => {
                        let mut g = Genotype::blank(config.search_space, config.steps, config.cells);
                        g.reduction_positions = default_reduction_positions(config.cells);
                        g
                    }
                };
                apply_share(&mut layout, config.share.unwrap_or(SharePolicy::PerCell));
                let mut alpha = AlphaTable::filled_like(&layout, 0.0);
                for v in alpha.tables.iter_mut().flatten().flatten() {
                    *v = config.alpha_init_scale * rng.sample::<f64, _>(StandardNormal);
                }
                (layout, alpha)
            }
        };
        layout.validate()?;
        let (c, _, _) = data.image_shape();
        let spec = NetworkSpec {
            in_channels: c,
            classes: data.classes,
            channels: config.channels,
            steps: layout.steps,
            n_cells: layout.n_cells(),
            reduction_positions: layout.reduction_positions.clone(),
        };
        let network = Network::supernet(spec, layout.search_space, config.seed.wrapping_add(1))?;
        let weight_opt = Sgd::new(network.params(), config.momentum, config.weight_decay);
        let alpha_opts = alpha
            .tables
            .iter()
            .map(|t| Adam::new(t.len() * alpha.op_count(), config.alpha_lr, config.alpha_betas, config.alpha_weight_decay))
            .collect();
        let start = match (config.mode, start) {
            (Mode::Dartopti, Some(g)) => g.clone(),
            _ => parse_alpha(&alpha, config.parse_method, config.threshold)?,
        };
        let half = data.len() / 2;
        Ok(SearchState {
            config: config.clone(),
            network,
            alpha,
            alpha_opts,
            weight_opt,
            epoch: 0,
            trace: DistanceTrace::new(),
            start,
            train_len: half,
            val_len: data.len() - half,
        })
    }

    /// Bit patterns of every weight and logit, for exact state comparisons.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut bits: Vec<u64> =
            self.network.params().iter().flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits())).collect();
        bits.extend(self.alpha.logits().map(f64::to_bits));
        bits
    }

    /// The current logits parsed with the configured method.
    pub fn genotype(&self) -> Result<Genotype, SearchError> {
        Ok(parse_alpha(&self.alpha, self.config.parse_method, self.config.threshold)?)
    }

    pub fn alpha_tensors(&self) -> Vec<Tensor> {
        self.alpha.tables.iter().map(|t| Tensor::vector(t.iter().flatten().copied().collect())).collect()
    }
}

fn apply_share(layout: &mut Genotype, policy: SharePolicy) {
    match policy {
        SharePolicy::PerCell => layout.share_groups = singleton_groups(layout.n_cells()),
        SharePolicy::Single => {
            let n = layout.n_cells();
            // A single table only makes sense over cells of one kind; keep the layout valid.
            layout.share_groups = vec![(0..n).collect()];
            let first = layout.cells[0].clone();
            let kinds: Vec<_> = layout.cells.iter().map(|c| c.kind).collect();
            for (cell, kind) in layout.cells.iter_mut().zip(kinds) {
                *cell = first.clone();
                cell.kind = kind;
            }
            if layout.validate().is_err() {
                layout.share_groups = singleton_groups(n);
            }
        }
        SharePolicy::Genotype => {}
    }
}

/// Re-expresses `alpha` over new share groups, each new group taking the
/// table of its first cell.
fn regroup(alpha: &AlphaTable, groups: &[Vec<usize>]) -> AlphaTable {
    let tables = groups.iter().map(|g| alpha.cell_table(g[0]).to_vec()).collect();
    AlphaTable { share_groups: groups.to_vec(), tables, ..alpha.clone() }
}

/// Forward pass bookkeeping.
struct Pass {
    graph: Graph,
    binding: Binding,
    groups: Vec<Var>,
    ce: Var,
    logits: Var,
}

fn forward_pass(
    state: &SearchState,
    images: &Tensor,
    labels: &[usize],
    train_weights: bool,
    train_alpha: bool,
    active: Option<&[bool]>,
) -> Result<Pass, SearchError> {
    let mut g = Graph::new();
    let binding = state.network.params().bind(&mut g, train_weights);
    let groups: Vec<Var> = state
        .alpha_tensors()
        .into_iter()
        .map(|t| if train_alpha { g.param(t) } else { g.constant(t) })
        .collect();
    let per_cell: Vec<Var> = (0..state.alpha.n_cells).map(|i| groups[state.alpha.group_of(i)]).collect();
    let arch = if state.config.mode.softmax() { Arch::Softmax(&per_cell) } else { Arch::Sigmoid(&per_cell) };
    let x = g.constant(images.clone());
    let logits = state.network.forward(&mut g, &binding, x, arch, active)?;
    let ce = g.cross_entropy(logits, labels)?;
    Ok(Pass { graph: g, binding, groups, ce, logits })
}

fn ablated(n: usize, j: usize) -> Vec<bool> {
    (0..n).map(|i| i != j).collect()
}

fn finite(epoch: usize, what: &'static str, value: f64) -> Result<f64, SearchError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SearchError::Divergence { epoch, what, value })
    }
}

/// Cross-entropy of one batch with the given cells active.
pub fn batch_loss(
    state: &SearchState,
    images: &Tensor,
    labels: &[usize],
    active: Option<&[bool]>,
) -> Result<f64, SearchError> {
    let p = forward_pass(state, images, labels, false, false, active)?;
    Ok(p.graph.value(p.ce).item())
}

/// `M_C^i`: loss with every cell active minus loss with cell `i` bypassed,
/// on one batch. Reads the state only.
pub fn marginal_contributions(state: &SearchState, images: &Tensor, labels: &[usize]) -> Result<Vec<f64>, SearchError> {
    let full = forward_pass(state, images, labels, false, false, None)?;
    let l_full = full.graph.value(full.ce).item();
    (0..state.alpha.n_cells)
        .map(|j| {
            let mask = ablated(state.alpha.n_cells, j);
            let p = forward_pass(state, images, labels, false, false, Some(&mask))?;
            Ok(l_full - p.graph.value(p.ce).item())
        })
        .collect()
}

/// Gradients of each share group's loss with respect to its own table.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGradients {
    pub per_group: Vec<Vec<f64>>,
    pub ce: f64,
    /// Marginal contributions, when the mode's loss needed them.
    pub mc: Option<Vec<f64>>,
}

fn group_grads(pass: &Pass) -> Vec<Vec<f64>> {
    pass.groups
        .iter()
        .map(|&v| pass.graph.grad(v).map_or_else(|| vec![0.0; pass.graph.value(v).len()], <[f64]>::to_vec))
        .collect()
}

/// Gradient of the zero-one loss of `tables` taken jointly.
fn zero_one_grads(tables: &[Tensor]) -> Vec<Vec<f64>> {
    let mut g = Graph::new();
    let vars: Vec<Var> = tables.iter().map(|t| g.param(t.clone())).collect();
    let l = zero_one_loss_var(&mut g, &vars);
    g.backward(l);
    vars.iter().map(|&v| g.grad(v).expect("every table reaches the loss").to_vec()).collect()
}

/// Combines separate tapes: one for the full network and one per bypassed
/// cell. With `m` the mean marginal contribution,
/// `dL_AB^i = (dM_i - (M_i / m) dm) / m` and `dM_i = dL_full - dL_i`.
pub fn alpha_gradients(state: &SearchState, images: &Tensor, labels: &[usize]) -> Result<AlphaGradients, SearchError> {
    let cfg = &state.config;
    let epoch = state.epoch;
    let mut full = forward_pass(state, images, labels, false, true, None)?;
    let ce = finite(epoch, "validation loss", full.graph.value(full.ce).item())?;
    full.graph.backward(full.ce);
    let g_full = group_grads(&full);
    let tables = state.alpha_tensors();
    let mut per_group = g_full.clone();
    let mut mc = None;
    match cfg.mode {
        Mode::Darts => {}
        Mode::Fairdarts => {
            for (acc, z) in per_group.iter_mut().zip(zero_one_grads(&tables)) {
                axpy(acc, cfg.loss.w01, &z);
            }
        }
        Mode::Ddarts | Mode::Dartopti => {
            for (acc, t) in per_group.iter_mut().zip(&tables) {
                let z = &zero_one_grads(std::slice::from_ref(t))[0];
                axpy(acc, cfg.loss.w01, z);
            }
            if cfg.loss.wab != 0.0 {
                let n = state.alpha.n_cells;
                let mut m_values = Vec::with_capacity(n);
                let mut d_m = Vec::with_capacity(n);
                for j in 0..n {
                    let mask = ablated(n, j);
                    let mut p = forward_pass(state, images, labels, false, true, Some(&mask))?;
                    let l_j = finite(epoch, "ablated validation loss", p.graph.value(p.ce).item())?;
                    p.graph.backward(p.ce);
                    let g_j = group_grads(&p);
                    m_values.push(ce - l_j);
                    d_m.push(g_full.iter().zip(&g_j).map(|(a, b)| sub(a, b)).collect::<Vec<_>>());
                }
                let m = m_values.iter().sum::<f64>() / n as f64;
                if m != 0.0 {
                    for (grp, members) in state.alpha.share_groups.iter().enumerate() {
                        let len = per_group[grp].len();
                        let mut dm_mean = vec![0.0; len];
                        for dmj in &d_m {
                            axpy(&mut dm_mean, 1.0 / n as f64, &dmj[grp]);
                        }
                        let mut lab = vec![0.0; len];
                        for &i in members {
                            let mut term = d_m[i][grp].clone();
                            axpy(&mut term, -m_values[i] / m, &dm_mean);
                            axpy(&mut lab, 1.0 / (m * members.len() as f64), &term);
                        }
                        axpy(&mut per_group[grp], cfg.loss.wab, &lab);
                    }
                }
                mc = Some(m_values);
            }
        }
    }
    Ok(AlphaGradients { per_group, ce, mc })
}

/// Reference for [`alpha_gradients`] in the distributed modes: every
/// forward pass on one tape and one backward sweep per group loss.
pub fn alpha_gradients_single_tape(
    state: &SearchState,
    images: &Tensor,
    labels: &[usize],
) -> Result<Vec<Vec<f64>>, SearchError> {
    let cfg = &state.config;
    let n = state.alpha.n_cells;
    let mut g = Graph::new();
    let binding = state.network.params().bind(&mut g, false);
    let groups: Vec<Var> = state.alpha_tensors().into_iter().map(|t| g.param(t)).collect();
    let per_cell: Vec<Var> = (0..n).map(|i| groups[state.alpha.group_of(i)]).collect();
    let x = g.constant(images.clone());
    let logits = state.network.forward(&mut g, &binding, x, Arch::Sigmoid(&per_cell), None)?;
    let ce = g.cross_entropy(logits, labels)?;
    let mut m = Vec::with_capacity(n);
    for j in 0..n {
        let mask = ablated(n, j);
        let lj = state.network.forward(&mut g, &binding, x, Arch::Sigmoid(&per_cell), Some(&mask))?;
        let ce_j = g.cross_entropy(lj, labels)?;
        m.push(g.sub(ce, ce_j));
    }
    let total = g.add_n(&m);
    let mean = g.mul_scalar(total, 1.0 / n as f64);
    let use_ablation = cfg.loss.wab != 0.0 && g.value(mean).item() != 0.0;
    let mut out = Vec::with_capacity(groups.len());
    for (grp, members) in state.alpha.share_groups.iter().enumerate() {
        let l01 = zero_one_loss_var(&mut g, &groups[grp..grp + 1]);
        let l01 = g.mul_scalar(l01, cfg.loss.w01);
        let mut terms = vec![ce, l01];
        if use_ablation {
            let labs: Vec<Var> = members
                .iter()
                .map(|&i| {
                    let d = g.sub(m[i], mean);
                    g.div(d, mean)
                })
                .collect();
            let sum = g.add_n(&labs);
            terms.push(g.mul_scalar(sum, cfg.loss.wab / members.len() as f64));
        }
        let loss = g.add_n(&terms);
        g.backward(loss);
        out.push(g.grad(groups[grp]).expect("the group reaches its loss").to_vec());
    }
    Ok(out)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// One architecture step: each group's optimizer moves only its own table.
pub fn alpha_step(state: &mut SearchState, images: &Tensor, labels: &[usize]) -> Result<AlphaGradients, SearchError> {
    let all: Vec<usize> = (0..state.alpha.tables.len()).collect();
    alpha_step_groups(state, &all, images, labels)
}

/// As [`alpha_step`], stepping only the listed share groups.
pub fn alpha_step_groups(
    state: &mut SearchState,
    groups: &[usize],
    images: &Tensor,
    labels: &[usize],
) -> Result<AlphaGradients, SearchError> {
    let grads = alpha_gradients(state, images, labels)?;
    let k = state.alpha.op_count();
    for &grp in groups {
        let grad = &grads.per_group[grp];
        if let Some(&bad) = grad.iter().find(|v| !v.is_finite()) {
            return Err(SearchError::Divergence { epoch: state.epoch, what: "architecture gradient", value: bad });
        }
        let mut flat: Vec<f64> = state.alpha.tables[grp].iter().flatten().copied().collect();
        state.alpha_opts[grp].step(&mut flat, grad);
        for (row, chunk) in state.alpha.tables[grp].iter_mut().zip(flat.chunks(k)) {
            row.copy_from_slice(chunk);
        }
    }
    Ok(grads)
}

/// One weight step on a training batch; returns the batch loss.
pub fn weight_step(state: &mut SearchState, images: &Tensor, labels: &[usize], lr: f64) -> Result<f64, SearchError> {
    let mut pass = forward_pass(state, images, labels, true, false, None)?;
    let loss = finite(state.epoch, "training loss", pass.graph.value(pass.ce).item())?;
    pass.graph.backward(pass.ce);
    let mut grads = pass.binding.grads(&pass.graph, state.network.params());
    let norm = clip_grad_norm(&mut grads, state.config.grad_clip);
    finite(state.epoch, "weight gradient norm", norm)?;
    state.weight_opt.step(state.network.params_mut(), &grads, lr);
    Ok(loss)
}

/// Mean cross-entropy and top-1 accuracy over `data`, in order.
pub fn evaluate(state: &SearchState, data: &Dataset) -> Result<(f64, f64), SearchError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let (mut loss, mut correct) = (0.0, 0usize);
    for chunk in idx.chunks(state.config.batch_size) {
        let (x, y) = data.batch(chunk);
        let p = forward_pass(state, &x, &y, false, false, None)?;
        loss += p.graph.value(p.ce).item() * chunk.len() as f64;
        correct += count_correct(p.graph.value(p.logits), &y);
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}

pub(crate) fn count_correct(logits: &Tensor, labels: &[usize]) -> usize {
    let classes = logits.shape()[1];
    labels
        .iter()
        .enumerate()
        .filter(|&(i, &t)| {
            let row = &logits.data()[i * classes..(i + 1) * classes];
            // First maximum wins, matching the parse tie rule.
            let best = row.iter().enumerate().fold(0, |b, (c, &v)| if v > row[b] { c } else { b });
            best == t
        })
        .count()
}

/// Shuffled batches of `0..len` for one epoch, reproducible from the seed.
pub(crate) fn epoch_batches(len: usize, batch: usize, seed: u64, epoch: usize, salt: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (epoch as u64) << 32);
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng);
    idx.chunks(batch.min(len).max(1)).map(<[usize]>::to_vec).collect()
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub genotype: Genotype,
    pub trace: DistanceTrace,
    pub metrics: Vec<EpochMetrics>,
    /// Epoch at which the plateau rule ended the search.
    pub stopped_at: Option<usize>,
    pub state: SearchState,
}

/// Runs one epoch; returns its metrics and whether the plateau rule fired.
pub fn run_epoch(state: &mut SearchState, train: &Dataset, val: &Dataset) -> Result<(EpochMetrics, bool), SearchError> {
    let started = Instant::now();
    let cfg = state.config.clone();
    let epoch = state.epoch;
    let pretraining = cfg.mode == Mode::Dartopti && epoch < cfg.pretrain_epochs;
    let lr = cosine_lr(cfg.weight_lr, cfg.weight_lr_min, epoch, cfg.epochs);
    let train_batches = epoch_batches(train.len(), cfg.batch_size, cfg.seed, epoch, 1);
    let val_batches = epoch_batches(val.len(), cfg.batch_size, cfg.seed, epoch, 2);
    let mut train_loss = 0.0;
    for (step, tb) in train_batches.iter().enumerate() {
        if !pretraining && cfg.alpha_lr != 0.0 {
            let (vx, vy) = val.batch(&val_batches[step % val_batches.len()]);
            alpha_step(state, &vx, &vy)?;
        }
        let (tx, ty) = train.batch(tb);
        train_loss += weight_step(state, &tx, &ty, lr)? * tb.len() as f64;
    }
    train_loss /= train.len() as f64;

    let parsed = state.genotype()?;
    let w = HammingWeights::for_pair(&state.start, &parsed);
    let distance = metric_m(&state.start, &parsed, &w)?;
    state.trace.push(epoch, distance)?;

    let probe: Vec<usize> = (0..cfg.batch_size.min(val.len())).collect();
    let (px, py) = val.batch(&probe);
    let mc = marginal_contributions(state, &px, &py)?;
    let mean_mc = mc.iter().sum::<f64>() / mc.len() as f64;
    let (val_loss, val_top1) = evaluate(state, val)?;
    finite(epoch, "validation loss", val_loss)?;
    state.epoch += 1;
    let metrics = EpochMetrics {
        epoch,
        train_loss,
        val_loss,
        val_top1,
        l01: zero_one_loss(&state.alpha),
        mean_mc,
        distance_du: distance,
        epoch_seconds: if cfg.timing { started.elapsed().as_secs_f64() } else { 0.0 },
    };
    let stop = cfg.mode == Mode::Dartopti && cfg.early_stop && plateau_stop(&state.trace, cfg.plateau) == Some(epoch);
    Ok((metrics, stop))
}

/// Full search on the halves of `data`.
pub fn search(start: Option<&Genotype>, data: &Dataset, config: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    let mut state = SearchState::new(config, start, data)?;
    let (train, val) = data.split_halves();
    let mut metrics = Vec::new();
    let mut stopped_at = None;
    while state.epoch < config.epochs {
        let (row, stop) = run_epoch(&mut state, &train, &val)?;
        let epoch = row.epoch;
        metrics.push(row);
        if stop {
            stopped_at = Some(epoch);
            break;
        }
    }
    Ok(SearchOutcome { genotype: state.genotype()?, trace: state.trace.clone(), metrics, stopped_at, state })
}
