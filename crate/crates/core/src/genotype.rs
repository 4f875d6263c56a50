use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::GenotypeError;
use crate::op::{OpKind, SearchSpace};

/// Number of cell inputs feeding each DAG (outputs of the two preceding cells).
pub const CELL_INPUTS: usize = 2;

/// Default number of intermediate nodes per cell.
pub const DEFAULT_STEPS: usize = 4;

/// Node pairs `(from, to)` of a cell DAG with `steps` intermediate nodes.
///
/// Nodes `0` and `1` are the cell inputs; intermediate node `j` has index
/// `j + 2` and receives one edge from every earlier node. Edges are listed
/// grouped by destination, sources ascending.
pub fn edge_pairs(steps: usize) -> Vec<(usize, usize)> {
    (0..steps)
        .flat_map(|j| (0..j + CELL_INPUTS).map(move |i| (i, j + CELL_INPUTS)))
        .collect()
}

pub fn edge_count(steps: usize) -> usize {
    (0..steps).map(|k| k + CELL_INPUTS).sum()
}

/// Reduction positions at one and two thirds of the depth (floor division).
pub fn default_reduction_positions(n_cells: usize) -> BTreeSet<usize> {
    [n_cells / 3, 2 * n_cells / 3].into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Normal,
    Reduction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSpec {
    pub from_node: usize,
    pub to_node: usize,
    /// One flag per operation of the active search space.
    pub selected: Vec<bool>,
}

impl EdgeSpec {
    pub fn empty(from_node: usize, to_node: usize, op_count: usize) -> Self {
        EdgeSpec { from_node, to_node, selected: vec![false; op_count] }
    }

    pub fn with_ops(from_node: usize, to_node: usize, op_count: usize, ops: &[OpKind]) -> Self {
        let mut edge = Self::empty(from_node, to_node, op_count);
        for op in ops {
            edge.selected[op.ordinal()] = true;
        }
        edge
    }

    pub fn popcount(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    pub fn ops(&self) -> impl Iterator<Item = OpKind> + '_ {
        self.selected
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .filter_map(|(i, _)| OpKind::from_ordinal(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellSpec {
    pub steps: usize,
    pub kind: CellKind,
    pub edges: Vec<EdgeSpec>,
}

impl CellSpec {
    /// A cell with every admissible edge present and nothing selected.
    pub fn empty(steps: usize, kind: CellKind, op_count: usize) -> Self {
        let edges = edge_pairs(steps)
            .into_iter()
            .map(|(i, j)| EdgeSpec::empty(i, j, op_count))
            .collect();
        CellSpec { steps, kind, edges }
    }

    pub fn edge_mut(&mut self, from_node: usize, to_node: usize) -> Option<&mut EdgeSpec> {
        self.edges
            .iter_mut()
            .find(|e| e.from_node == from_node && e.to_node == to_node)
    }

    pub fn edge(&self, from_node: usize, to_node: usize) -> Option<&EdgeSpec> {
        self.edges
            .iter()
            .find(|e| e.from_node == from_node && e.to_node == to_node)
    }

    fn validate(&self, cell: usize, op_count: usize) -> Result<(), GenotypeError> {
        let pairs = edge_pairs(self.steps);
        if self.edges.len() != pairs.len() {
            return Err(GenotypeError::EdgeCount {
                cell,
                expected: pairs.len(),
                found: self.edges.len(),
            });
        }
        for (index, (edge, &(from, to))) in self.edges.iter().zip(&pairs).enumerate() {
            if edge.from_node >= edge.to_node {
                return Err(GenotypeError::BackwardEdge {
                    cell,
                    edge: index,
                    from: edge.from_node,
                    to: edge.to_node,
                });
            }
            if (edge.from_node, edge.to_node) != (from, to) {
                return Err(GenotypeError::UnexpectedEdge {
                    cell,
                    edge: index,
                    expected: (from, to),
                    found: (edge.from_node, edge.to_node),
                });
            }
            if edge.selected.len() != op_count {
                return Err(GenotypeError::SelectionLength {
                    cell,
                    edge: index,
                    expected: op_count,
                    found: edge.selected.len(),
                });
            }
            let popcount = edge.popcount();
            if popcount > 2 {
                return Err(GenotypeError::TooManyOps { cell, edge: index, popcount });
            }
        }
        Ok(())
    }
}

/// A discrete architecture: one cell description per network position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Genotype {
    pub search_space: SearchSpace,
    pub steps: usize,
    pub cells: Vec<CellSpec>,
    pub reduction_positions: BTreeSet<usize>,
    /// Partition of cell indices into groups that share architecture weights.
    pub share_groups: Vec<Vec<usize>>,
}

impl Genotype {
    /// An all-empty genotype with default reduction placement and one group per cell.
    pub fn blank(search_space: SearchSpace, steps: usize, n_cells: usize) -> Self {
        let reduction_positions = default_reduction_positions(n_cells);
        let cells = (0..n_cells)
            .map(|i| {
                let kind = if reduction_positions.contains(&i) {
                    CellKind::Reduction
                } else {
                    CellKind::Normal
                };
                CellSpec::empty(steps, kind, search_space.op_count())
            })
            .collect();
        Genotype {
            search_space,
            steps,
            cells,
            reduction_positions,
            share_groups: singleton_groups(n_cells),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn op_count(&self) -> usize {
        self.search_space.op_count()
    }

    /// Index of the share group containing `cell`.
    pub fn group_of(&self, cell: usize) -> Option<usize> {
        self.share_groups.iter().position(|g| g.contains(&cell))
    }

    pub fn validate(&self) -> Result<(), GenotypeError> {
        if self.cells.is_empty() {
            return Err(GenotypeError::NoCells);
        }
        if self.steps == 0 {
            return Err(GenotypeError::ZeroSteps);
        }
        let op_count = self.op_count();
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.steps != self.steps {
                return Err(GenotypeError::StepMismatch {
                    cell: i,
                    expected: self.steps,
                    found: cell.steps,
                });
            }
            cell.validate(i, op_count)?;
            let is_reduction = self.reduction_positions.contains(&i);
            if is_reduction != (cell.kind == CellKind::Reduction) {
                return Err(GenotypeError::KindMismatch { cell: i, reduction: is_reduction });
            }
        }
        if let Some(&p) = self.reduction_positions.iter().find(|&&p| p >= self.cells.len()) {
            return Err(GenotypeError::ReductionOutOfRange { position: p, cells: self.cells.len() });
        }
        validate_groups(&self.share_groups, self.cells.len())?;
        for (g, group) in self.share_groups.iter().enumerate() {
            let first = &self.cells[group[0]];
            if let Some(&other) = group[1..].iter().find(|&&c| &self.cells[c] != first) {
                return Err(GenotypeError::GroupNotIdentical { group: g, cell: other });
            }
        }
        Ok(())
    }

    /// Regroups cells so that exactly the identical cells share a group,
    /// groups ordered by first occurrence.
    pub fn group_identical_cells(&mut self) {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.cells.len() {
            match groups.iter_mut().find(|g| self.cells[g[0]] == self.cells[i]) {
                Some(g) => g.push(i),
                None => groups.push(vec![i]),
            }
        }
        self.share_groups = groups;
    }

    /// True when both genotypes select the same operations on every edge of every cell.
    pub fn same_selections(&self, other: &Genotype) -> bool {
        self.cells.len() == other.cells.len()
            && self.cells.iter().zip(&other.cells).all(|(a, b)| {
                a.edges.len() == b.edges.len()
                    && a.edges.iter().zip(&b.edges).all(|(x, y)| x.selected == y.selected)
            })
    }
}

/// A genotype with default layout whose every edge selects 0, 1 or 2
/// uniformly chosen distinct operations.
pub fn random_genotype<R: Rng + ?Sized>(
    rng: &mut R,
    search_space: SearchSpace,
    steps: usize,
    n_cells: usize,
) -> Genotype {
    let mut genotype = Genotype::blank(search_space, steps, n_cells);
    let k = search_space.op_count();
    for cell in &mut genotype.cells {
        for edge in &mut cell.edges {
            let count = rng.gen_range(0..=2);
            for op in sample(rng, k, count) {
                edge.selected[op] = true;
            }
        }
    }
    genotype
}

pub fn singleton_groups(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

pub(crate) fn validate_groups(groups: &[Vec<usize>], n_cells: usize) -> Result<(), GenotypeError> {
    let mut seen = vec![false; n_cells];
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(GenotypeError::EmptyGroup { group: g });
        }
        for &c in group {
            if c >= n_cells {
                return Err(GenotypeError::GroupIndexOutOfRange { group: g, cell: c });
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(GenotypeError::GroupOverlap { cell: c });
            }
        }
    }
    if let Some(c) = seen.iter().position(|&s| !s) {
        return Err(GenotypeError::UngroupedCell { cell: c });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_step_cells_have_fourteen_edges() {
        assert_eq!(edge_count(4), 14);
        assert_eq!(edge_pairs(4).len(), 14);
        assert_eq!(edge_pairs(2), vec![(0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]);
    }

    #[test]
    fn default_reductions_sit_at_thirds() {
        assert_eq!(default_reduction_positions(8), [2, 5].into());
        assert_eq!(default_reduction_positions(14), [4, 9].into());
        assert_eq!(default_reduction_positions(4), [1, 2].into());
        assert_eq!(default_reduction_positions(1), [0].into());
    }

    #[test]
    fn blank_genotype_is_valid() {
        let g = Genotype::blank(SearchSpace::Darts, 4, 8);
        g.validate().unwrap();
        assert_eq!(g.cells[2].kind, CellKind::Reduction);
        assert_eq!(g.cells[5].kind, CellKind::Reduction);
        assert_eq!(g.cells[3].kind, CellKind::Normal);
    }

    #[test]
    fn three_ops_on_an_edge_is_rejected() {
        let mut g = Genotype::blank(SearchSpace::Darts, 4, 3);
        g.cells[0].edges[3].selected[..3].fill(true);
        assert_eq!(
            g.validate(),
            Err(GenotypeError::TooManyOps { cell: 0, edge: 3, popcount: 3 })
        );
    }

    #[test]
    fn groups_must_partition_identical_cells() {
        let mut g = Genotype::blank(SearchSpace::Darts, 2, 4);
        g.share_groups = vec![vec![0, 3], vec![1, 2]];
        g.validate().unwrap();

        g.cells[3].edges[0].selected[1] = true;
        assert_eq!(g.validate(), Err(GenotypeError::GroupNotIdentical { group: 0, cell: 3 }));

        g.share_groups = vec![vec![0], vec![1, 2]];
        assert_eq!(g.validate(), Err(GenotypeError::UngroupedCell { cell: 3 }));

        g.share_groups = vec![vec![0, 1], vec![1, 2], vec![3]];
        assert_eq!(g.validate(), Err(GenotypeError::GroupOverlap { cell: 1 }));
    }

    #[test]
    fn regrouping_collects_identical_cells() {
        let mut g = Genotype::blank(SearchSpace::Darts, 2, 4);
        g.group_identical_cells();
        assert_eq!(g.share_groups, vec![vec![0, 3], vec![1, 2]]);
        g.validate().unwrap();
    }

    #[test]
    fn kinds_follow_reduction_positions() {
        let mut g = Genotype::blank(SearchSpace::Darts, 2, 4);
        g.cells[0].kind = CellKind::Reduction;
        assert_eq!(g.validate(), Err(GenotypeError::KindMismatch { cell: 0, reduction: false }));
    }
}
