//! Expansion of a searched architecture to a deeper one by repeating its
//! normal-cell runs between relocated reduction cells.

use std::collections::BTreeMap;

use crate::error::DeriveError;
use crate::genotype::{default_reduction_positions, CellKind, Genotype};

/// Source-cell index for each of the `n` cells of the derived architecture.
///
/// When `n <= source_cells` this is the prefix `0..n`. Otherwise, with
/// `m = source_cells / 3` and `m2 = 2 * source_cells / 3` the source reduction
/// slots, position `n / 3` takes `m`, position `2n / 3` takes `m2`, and the
/// three runs around them cycle through the source's normal cells of the
/// matching run.
pub fn derive_indices(source_cells: usize, n: usize) -> Result<Vec<usize>, DeriveError> {
    if n == 0 {
        return Err(DeriveError::ZeroCells);
    }
    if n <= source_cells {
        return Ok((0..n).collect());
    }
    let underivable = |reason| DeriveError::Underivable { cells: source_cells, n, reason };
    if source_cells < 3 {
        return Err(underivable("fewer than three source cells"));
    }
    let m = source_cells / 3;
    let m2 = 2 * source_cells / 3;
    let first = n / 3;
    let second = 2 * n / 3;
    let middle_run = m2 - 1 - m;
    let last_run = source_cells - 1 - m2;
    (0..n)
        .map(|i| {
            if i < first {
                Ok(i % m)
            } else if i == first {
                Ok(m)
            } else if i < second {
                if middle_run == 0 {
                    return Err(underivable("no normal cells between the source reductions"));
                }
                Ok(i % middle_run + m + 1)
            } else if i == second {
                Ok(m2)
            } else {
                if last_run == 0 {
                    return Err(underivable("no normal cells after the second source reduction"));
                }
                Ok(i % last_run + m2 + 1)
            }
        })
        .collect()
}

/// Builds the `n`-cell genotype. Copies of one source cell share a group.
pub fn derive_genotype(source: &Genotype, n: usize) -> Result<Genotype, DeriveError> {
    source.validate()?;
    let indices = derive_indices(source.n_cells(), n)?;
    if n > source.n_cells() {
        let expected = default_reduction_positions(source.n_cells());
        if source.reduction_positions != expected {
            return Err(DeriveError::NonStandardReductions {
                expected: expected.into_iter().collect(),
                found: source.reduction_positions.iter().copied().collect(),
            });
        }
    }
    let reduction_positions = default_reduction_positions(n);
    let cells = indices
        .iter()
        .enumerate()
        .map(|(j, &src)| {
            let mut cell = source.cells[src].clone();
            cell.kind = if reduction_positions.contains(&j) {
                CellKind::Reduction
            } else {
                CellKind::Normal
            };
            cell
        })
        .collect();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, &src) in indices.iter().enumerate() {
        groups.entry(src).or_default().push(j);
    }
    let mut share_groups: Vec<Vec<usize>> = groups.into_values().collect();
    share_groups.sort_by_key(|g| g[0]);
    let derived = Genotype {
        search_space: source.search_space,
        steps: source.steps,
        cells,
        reduction_positions,
        share_groups,
    };
    derived.validate()?;
    Ok(derived)
}
