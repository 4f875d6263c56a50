//! Cell-based convolutional networks: the supernet holding every candidate
//! operation on every edge, and discrete networks built from a genotype.
//!
//! Each cell reads the outputs of the two preceding cells (the stem output
//! stands in for missing predecessors), preprocesses them to the cell's
//! channel count, evaluates its intermediate nodes in order and concatenates
//! them. Reduction cells apply stride 2 on the edges leaving the cell inputs
//! and double the channel count.

use std::collections::BTreeSet;

use ddarts_autodiff::{
    mixed_edge, mixed_edge_softmax, AutodiffError, Binding, Conv2dSpec, ConvStage, FactorizedReduce, Graph, ParamId,
    ParamStore, PrimitiveOp, Tensor, Var,
};
use ddarts_core::genotype::{edge_pairs, CELL_INPUTS};
use ddarts_core::{Genotype, OpKind, SearchSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::SearchError;

/// Macro-architecture shared by supernets and discrete networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub in_channels: usize,
    pub classes: usize,
    /// Channels per node in the first cells; doubled at every reduction.
    pub channels: usize,
    pub steps: usize,
    pub n_cells: usize,
    pub reduction_positions: BTreeSet<usize>,
}

/// How edge outputs are combined.
#[derive(Debug, Clone, Copy)]
pub enum Arch<'a> {
    /// One flattened `edges x K` logit tensor per cell, sigmoid-weighted.
    Sigmoid(&'a [Var]),
    /// As `Sigmoid`, softmax-weighted per edge.
    Softmax(&'a [Var]),
    /// Plain sum of the edge's operations.
    Fixed,
}

#[derive(Debug, Clone)]
enum Pre {
    Identity,
    Stage(ConvStage),
    Reduce(FactorizedReduce),
}

impl Pre {
    fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Var {
        match self {
            Pre::Identity => x,
            Pre::Stage(s) => s.forward(g, p, x),
            Pre::Reduce(r) => r.forward(g, p, x),
        }
    }
}

#[derive(Debug, Clone)]
struct Edge {
    from: usize,
    to: usize,
    ops: Vec<PrimitiveOp>,
}

#[derive(Debug, Clone)]
struct Cell {
    reduction: bool,
    channels: usize,
    out_channels: usize,
    pre0: Pre,
    pre1: Pre,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    space: Option<SearchSpace>,
    params: ParamStore,
    stem: ConvStage,
    cells: Vec<Cell>,
    head_w: ParamId,
    head_b: ParamId,
}

impl Network {
    /// Every operation of `space` on every edge.
    pub fn supernet(spec: NetworkSpec, space: SearchSpace, seed: u64) -> Result<Self, SearchError> {
        let ops = space.ops().to_vec();
        let mut net = Network::build(spec, seed, |_, _| ops.clone())?;
        net.space = Some(space);
        Ok(net)
    }

    /// Only the operations the genotype selects; empty edges contribute nothing.
    pub fn discrete(
        genotype: &Genotype,
        in_channels: usize,
        classes: usize,
        channels: usize,
        seed: u64,
    ) -> Result<Self, SearchError> {
        genotype.validate()?;
        let spec = NetworkSpec {
            in_channels,
            classes,
            channels,
            steps: genotype.steps,
            n_cells: genotype.n_cells(),
            reduction_positions: genotype.reduction_positions.clone(),
        };
        Network::build(spec, seed, |cell, edge| genotype.cells[cell].edges[edge].ops().collect())
    }

    fn build(spec: NetworkSpec, seed: u64, ops_for: impl Fn(usize, usize) -> Vec<OpKind>) -> Result<Self, SearchError> {
        if spec.n_cells == 0 || spec.steps == 0 || spec.channels == 0 || spec.classes == 0 {
            return Err(SearchError::Config("network needs cells, steps, channels and classes".into()));
        }
        if let Some(&p) = spec.reduction_positions.iter().find(|&&p| p >= spec.n_cells) {
            return Err(SearchError::Config(format!("reduction position {p} outside {} cells", spec.n_cells)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let stem = ConvStage::plain(&mut params, &mut rng, "stem", spec.in_channels, spec.channels, 3, 1);
        let pairs = edge_pairs(spec.steps);
        let (mut c_pp, mut c_p, mut c) = (spec.channels, spec.channels, spec.channels);
        let mut reduction_prev = false;
        let mut cells = Vec::with_capacity(spec.n_cells);
        for i in 0..spec.n_cells {
            let reduction = spec.reduction_positions.contains(&i);
            if reduction {
                c *= 2;
            }
            let name = format!("cell{i}");
            let pre0 = if reduction_prev {
                Pre::Reduce(FactorizedReduce::new(&mut params, &mut rng, &format!("{name}.pre0"), c_pp, c)?)
            } else if c_pp == c {
                Pre::Identity
            } else {
                Pre::Stage(ConvStage::plain(&mut params, &mut rng, &format!("{name}.pre0"), c_pp, c, 1, 1))
            };
            let pre1 = if c_p == c {
                Pre::Identity
            } else {
                Pre::Stage(ConvStage::plain(&mut params, &mut rng, &format!("{name}.pre1"), c_p, c, 1, 1))
            };
            let mut edges = Vec::with_capacity(pairs.len());
            for (e, &(from, to)) in pairs.iter().enumerate() {
                let stride = if reduction && from < CELL_INPUTS { 2 } else { 1 };
                let ops = ops_for(i, e)
                    .into_iter()
                    .map(|k| PrimitiveOp::new(k, c, stride, &mut params, &mut rng, &format!("{name}.e{e}.{k}")))
                    .collect::<Result<Vec<_>, _>>()?;
                edges.push(Edge { from, to, ops });
            }
            let out_channels = c * spec.steps;
            cells.push(Cell { reduction, channels: c, out_channels, pre0, pre1, edges });
            c_pp = c_p;
            c_p = out_channels;
            reduction_prev = reduction;
        }
        let head_w = params.add_he_uniform("head.w", &[spec.classes, c_p], c_p, &mut rng);
        let head_b = params.add("head.b", Tensor::zeros(&[spec.classes]));
        Ok(Network { spec, space: None, params, stem, cells, head_w, head_b })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// The search space of a supernet; `None` for discrete networks.
    pub fn search_space(&self) -> Option<SearchSpace> {
        self.space
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Class logits `[B, classes]`. A cell whose `active` flag is false is
    /// bypassed: its most recent input is passed on, average-pooled 2x2 at
    /// reductions and channel-tiled to the cell's output width.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Binding,
        x: Var,
        arch: Arch<'_>,
        active: Option<&[bool]>,
    ) -> Result<Var, AutodiffError> {
        if let Arch::Sigmoid(t) | Arch::Softmax(t) = arch {
            assert_eq!(t.len(), self.cells.len(), "one logit tensor per cell");
        }
        let stem = self.stem.forward(g, p, x);
        let (mut s0, mut s1) = (stem, stem);
        for (i, cell) in self.cells.iter().enumerate() {
            let out = if active.is_none_or(|a| a[i]) {
                self.cell_forward(g, p, i, cell, s0, s1, arch)?
            } else {
                bypass(g, cell, s1)?
            };
            s0 = s1;
            s1 = out;
        }
        let pooled = g.global_avg_pool(s1);
        Ok(g.linear(pooled, p[self.head_w], p[self.head_b]))
    }

    #[allow(clippy::too_many_arguments)]
    fn cell_forward(
        &self,
        g: &mut Graph,
        p: &Binding,
        index: usize,
        cell: &Cell,
        s0: Var,
        s1: Var,
        arch: Arch<'_>,
    ) -> Result<Var, AutodiffError> {
        let a = cell.pre0.forward(g, p, s0);
        let b = cell.pre1.forward(g, p, s1);
        let (batch, _, h, w) = g.value(b).dims4();
        let stride = if cell.reduction { 2 } else { 1 };
        let node_shape = [batch, cell.channels, h / stride, w / stride];
        let mut states = vec![a, b];
        let k = self.space.map_or(0, SearchSpace::op_count);
        for node in CELL_INPUTS..CELL_INPUTS + self.spec.steps {
            let mut terms = Vec::new();
            for (e, edge) in cell.edges.iter().enumerate().filter(|(_, e)| e.to == node) {
                if edge.ops.is_empty() {
                    continue;
                }
                let input = states[edge.from];
                let out = match arch {
                    Arch::Sigmoid(tables) => {
                        let alpha = g.slice(tables[index], e * k, &[k]);
                        mixed_edge(g, p, input, &edge.ops, alpha)?
                    }
                    Arch::Softmax(tables) => {
                        let alpha = g.slice(tables[index], e * k, &[k]);
                        mixed_edge_softmax(g, p, input, &edge.ops, alpha)?
                    }
                    Arch::Fixed => {
                        let outs = edge.ops.iter().map(|op| op.forward(g, p, input)).collect::<Result<Vec<_>, _>>()?;
                        g.add_n(&outs)
                    }
                };
                terms.push(out);
            }
            let value = if terms.is_empty() { g.constant(Tensor::zeros(&node_shape)) } else { g.add_n(&terms) };
            states.push(value);
        }
        Ok(g.concat(&states[CELL_INPUTS..]))
    }
}

fn bypass(g: &mut Graph, cell: &Cell, x: Var) -> Result<Var, AutodiffError> {
    let x = if cell.reduction { g.avg_pool(x, 2, Conv2dSpec::new(2, 0)) } else { x };
    let c = g.shape(x)[1];
    if !cell.out_channels.is_multiple_of(c) {
        return Err(AutodiffError::ShapeMismatch {
            op: "cell bypass".into(),
            expected: format!("channel count dividing {}", cell.out_channels),
            found: g.shape(x).to_vec(),
        });
    }
    Ok(match cell.out_channels / c {
        1 => x,
        f => g.tile_channels(x, f),
    })
}
