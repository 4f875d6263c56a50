//! Exact size of the cell search space.

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error("operation count must be at least 1")]
    ZeroOps,
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("cell count must be at least 1")]
    ZeroCells,
}

/// Number of distinct single cells with `op_count` candidate operations and
/// `steps` intermediate nodes: the product over nodes `i = 1..=steps` of
/// `(i+1)·i/2 · K²`.
pub fn search_space_size(op_count: u32, steps: u32) -> Result<BigUint, SpaceError> {
    if op_count == 0 {
        return Err(SpaceError::ZeroOps);
    }
    if steps == 0 {
        return Err(SpaceError::ZeroSteps);
    }
    let k2 = BigUint::from(op_count) * op_count;
    Ok((1..=steps as u64).fold(BigUint::from(1u32), |acc, i| {
        acc * BigUint::from((i + 1) * i / 2) * &k2
    }))
}

/// Size of the joint space when `cells` cells are searched independently.
pub fn total_space_size(op_count: u32, steps: u32, cells: u32) -> Result<BigUint, SpaceError> {
    if cells == 0 {
        return Err(SpaceError::ZeroCells);
    }
    Ok(search_space_size(op_count, steps)?.pow(cells))
}

/// Floor of the base-10 logarithm of a positive integer.
pub fn decimal_magnitude(n: &BigUint) -> usize {
    n.to_str_radix(10).len().saturating_sub(1)
}
