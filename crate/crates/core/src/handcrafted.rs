//! Genotype encodings of handcrafted networks in the extended search space.
//!
//! Node numbering follows [`edge_pairs`](crate::genotype::edge_pairs): nodes 0
//! and 1 are the cell inputs, intermediate nodes start at 2. Every edge of
//! every encoding selects at least one operation so the encodings survive a
//! round trip through logits and edge parsing unchanged.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::genotype::{default_reduction_positions, CellKind, CellSpec, Genotype};
use crate::op::{OpKind, SearchSpace};

use OpKind::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handcrafted {
    ResNet18,
    ResNet50,
    Xception,
}

impl Handcrafted {
    pub const ALL: [Handcrafted; 3] = [Handcrafted::ResNet18, Handcrafted::ResNet50, Handcrafted::Xception];

    pub fn name(self) -> &'static str {
        match self {
            Handcrafted::ResNet18 => "resnet18",
            Handcrafted::ResNet50 => "resnet50",
            Handcrafted::Xception => "xception",
        }
    }
}

impl fmt::Display for Handcrafted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Handcrafted {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Handcrafted::ALL
            .iter()
            .copied()
            .find(|h| h.name() == s)
            .ok_or_else(|| format!("unknown architecture {s:?} (expected resnet18, resnet50 or xception)"))
    }
}

pub fn encode_handcrafted(arch: Handcrafted) -> Genotype {
    match arch {
        Handcrafted::ResNet18 => resnet(&[SimpleConv3x3], &[SimpleConv3x3]),
        Handcrafted::ResNet50 => resnet(&[Bottleneck1x3x1, SkipConnect], &[Bottleneck1x3x1]),
        Handcrafted::Xception => xception(),
    }
}

/// Four cells of two stacked blocks each. `first` feeds node 2 from both
/// inputs; `second` maps node 2 to node 3, with identity shortcuts from the
/// inputs into node 3.
fn resnet(first: &[OpKind], second: &[OpKind]) -> Genotype {
    let build = |kind| {
        let mut cell = CellSpec::empty(2, kind, SearchSpace::Extended.op_count());
        set(&mut cell, 0, 2, first);
        set(&mut cell, 1, 2, first);
        set(&mut cell, 0, 3, &[SkipConnect]);
        set(&mut cell, 1, 3, &[SkipConnect]);
        set(&mut cell, 2, 3, second);
        cell
    };
    assemble(4, default_reduction_positions(4), 2, build)
}

/// Xception's 13 layers as chains of three nodes: the chain ops sit on the
/// input edges of node 2 and on 2->3 and 3->4, all other edges are shortcuts.
fn xception() -> Genotype {
    let chain = |ops: [OpKind; 3], kind| {
        let mut cell = CellSpec::empty(3, kind, SearchSpace::Extended.op_count());
        for edge in &mut cell.edges {
            edge.selected[SkipConnect.ordinal()] = true;
        }
        set(&mut cell, 0, 2, &[ops[0]]);
        set(&mut cell, 1, 2, &[ops[0]]);
        set(&mut cell, 2, 3, &[ops[1]]);
        set(&mut cell, 3, 4, &[ops[2]]);
        cell
    };
    let entry = chain([SepConv3x3, SepConv3x3, SkipConnect], CellKind::Normal);
    let reduce = chain([SepConv3x3, SepConv3x3, SepConv3x3], CellKind::Reduction);
    let middle = chain([SepConv3x3, SepConv3x3, SepConv3x3], CellKind::Normal);
    let exit_a = chain([SepConv3x3, SkipConnect, SkipConnect], CellKind::Normal);
    let exit_b = chain([SkipConnect, SepConv3x3, SepConv3x3], CellKind::Normal);

    let mut cells = vec![entry, reduce.clone()];
    cells.extend(std::iter::repeat_n(middle, 8));
    cells.extend([reduce, exit_a, exit_b]);
    let mut genotype = Genotype {
        search_space: SearchSpace::Extended,
        steps: 3,
        cells,
        reduction_positions: [1, 10].into_iter().collect(),
        share_groups: Vec::new(),
    };
    genotype.group_identical_cells();
    genotype
}

fn set(cell: &mut CellSpec, from: usize, to: usize, ops: &[OpKind]) {
    let edge = cell.edge_mut(from, to).expect("edge outside the cell DAG");
    edge.selected.fill(false);
    for op in ops {
        edge.selected[op.ordinal()] = true;
    }
}

fn assemble(
    n_cells: usize,
    reductions: BTreeSet<usize>,
    steps: usize,
    build: impl Fn(CellKind) -> CellSpec,
) -> Genotype {
    let cells = (0..n_cells)
        .map(|i| {
            build(if reductions.contains(&i) { CellKind::Reduction } else { CellKind::Normal })
        })
        .collect();
    let mut genotype = Genotype {
        search_space: SearchSpace::Extended,
        steps,
        cells,
        reduction_positions: reductions,
        share_groups: Vec::new(),
    };
    genotype.group_identical_cells();
    genotype
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodings_are_valid_and_fully_populated() {
        for arch in Handcrafted::ALL {
            let g = encode_handcrafted(arch);
            g.validate().unwrap();
            assert_eq!(g.search_space, SearchSpace::Extended);
            for cell in &g.cells {
                assert!(cell.edges.iter().all(|e| (1..=2).contains(&e.popcount())), "{arch}");
            }
        }
    }

    #[test]
    fn resnets_share_by_stage_kind() {
        for arch in [Handcrafted::ResNet18, Handcrafted::ResNet50] {
            let g = encode_handcrafted(arch);
            assert_eq!(g.n_cells(), 4);
            assert_eq!(g.reduction_positions, [1, 2].into());
            assert_eq!(g.share_groups, vec![vec![0, 3], vec![1, 2]]);
        }
    }

    #[test]
    fn resnet18_is_a_basic_block() {
        let g = encode_handcrafted(Handcrafted::ResNet18);
        let cell = &g.cells[0];
        assert_eq!(cell.edge(1, 2).unwrap().ops().collect::<Vec<_>>(), vec![SimpleConv3x3]);
        assert_eq!(cell.edge(2, 3).unwrap().ops().collect::<Vec<_>>(), vec![SimpleConv3x3]);
        assert_eq!(cell.edge(1, 3).unwrap().ops().collect::<Vec<_>>(), vec![SkipConnect]);
    }

    #[test]
    fn resnet50_input_edge_is_bottleneck_plus_identity() {
        let g = encode_handcrafted(Handcrafted::ResNet50);
        let ops: Vec<_> = g.cells[0].edge(1, 2).unwrap().ops().collect();
        assert_eq!(ops, vec![SkipConnect, Bottleneck1x3x1]);
    }

    #[test]
    fn xception_has_thirteen_cells_in_five_groups() {
        let g = encode_handcrafted(Handcrafted::Xception);
        assert_eq!(g.n_cells(), 13);
        assert_eq!(g.share_groups.len(), 5);
        assert_eq!(g.share_groups[2], (2..10).collect::<Vec<_>>());
        assert_eq!(g.share_groups[1], vec![1, 10]);
        let used: BTreeSet<OpKind> = g.cells.iter().flat_map(|c| c.edges.iter().flat_map(|e| e.ops())).collect();
        assert_eq!(used, [SkipConnect, SepConv3x3].into());
    }

    #[test]
    fn names_parse() {
        assert_eq!("xception".parse::<Handcrafted>().unwrap(), Handcrafted::Xception);
        assert!("vgg16".parse::<Handcrafted>().is_err());
    }
}
