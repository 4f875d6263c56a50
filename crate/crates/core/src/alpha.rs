use std::collections::BTreeSet;

use crate::error::AlphaError;
use crate::genotype::{edge_count, validate_groups, CellKind, Genotype};
use crate::op::SearchSpace;

/// Continuous architecture parameters: one logit per operation per edge.
///
/// Cells in the same share group read the same table, so `tables` holds one
/// `edges × K` matrix per group rather than per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTable {
    pub search_space: SearchSpace,
    pub steps: usize,
    pub n_cells: usize,
    pub reduction_positions: BTreeSet<usize>,
    pub share_groups: Vec<Vec<usize>>,
    pub tables: Vec<Vec<Vec<f64>>>,
}

impl AlphaTable {
    /// A table with the layout of `genotype` (steps, reductions, groups) and
    /// every logit set to `value`.
    pub fn filled_like(genotype: &Genotype, value: f64) -> Self {
        let k = genotype.op_count();
        let edges = edge_count(genotype.steps);
        AlphaTable {
            search_space: genotype.search_space,
            steps: genotype.steps,
            n_cells: genotype.n_cells(),
            reduction_positions: genotype.reduction_positions.clone(),
            share_groups: genotype.share_groups.clone(),
            tables: vec![vec![vec![value; k]; edges]; genotype.share_groups.len()],
        }
    }

    pub fn op_count(&self) -> usize {
        self.search_space.op_count()
    }

    pub fn edge_count(&self) -> usize {
        edge_count(self.steps)
    }

    pub fn group_of(&self, cell: usize) -> usize {
        self.share_groups
            .iter()
            .position(|g| g.contains(&cell))
            .expect("cell outside share groups")
    }

    pub fn cell_table(&self, cell: usize) -> &[Vec<f64>] {
        &self.tables[self.group_of(cell)]
    }

    pub fn kind(&self, cell: usize) -> CellKind {
        if self.reduction_positions.contains(&cell) {
            CellKind::Reduction
        } else {
            CellKind::Normal
        }
    }

    /// Every distinct logit (shared tables counted once).
    pub fn logits(&self) -> impl Iterator<Item = f64> + '_ {
        self.tables.iter().flatten().flatten().copied()
    }

    pub fn validate(&self) -> Result<(), AlphaError> {
        if self.n_cells == 0 {
            return Err(AlphaError::NoCells);
        }
        validate_groups(&self.share_groups, self.n_cells)?;
        if self.tables.len() != self.share_groups.len() {
            return Err(AlphaError::TableCount {
                expected: self.share_groups.len(),
                found: self.tables.len(),
            });
        }
        let edges = self.edge_count();
        let k = self.op_count();
        for (g, table) in self.tables.iter().enumerate() {
            if table.len() != edges {
                return Err(AlphaError::EdgeCount { group: g, expected: edges, found: table.len() });
            }
            for (e, logits) in table.iter().enumerate() {
                if logits.len() != k {
                    return Err(AlphaError::LogitCount {
                        group: g,
                        edge: e,
                        expected: k,
                        found: logits.len(),
                    });
                }
                if logits.iter().any(|a| !a.is_finite()) {
                    return Err(AlphaError::NonFinite { group: g, edge: e });
                }
            }
        }
        Ok(())
    }
}

/// Warm-start logits for a genotype: `hot` on selected operations, `cold` elsewhere.
pub fn genotype_to_alpha(genotype: &Genotype, hot: f64, cold: f64) -> Result<AlphaTable, AlphaError> {
    if !(hot > cold) {
        return Err(AlphaError::HotNotAboveCold { hot, cold });
    }
    genotype.validate()?;
    let mut alpha = AlphaTable::filled_like(genotype, cold);
    for (g, group) in genotype.share_groups.iter().enumerate() {
        let cell = &genotype.cells[group[0]];
        for (logits, edge) in alpha.tables[g].iter_mut().zip(&cell.edges) {
            for (a, &on) in logits.iter_mut().zip(&edge.selected) {
                if on {
                    *a = hot;
                }
            }
        }
    }
    Ok(alpha)
}
