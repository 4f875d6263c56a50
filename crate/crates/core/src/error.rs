use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenotypeError {
    #[error("genotype has no cells")]
    NoCells,
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("cell {cell}: declares {found} steps, genotype declares {expected}")]
    StepMismatch { cell: usize, expected: usize, found: usize },
    #[error("cell {cell}: expected {expected} edges, found {found}")]
    EdgeCount { cell: usize, expected: usize, found: usize },
    #[error("cell {cell}, edge {edge}: from node {from} is not before to node {to}")]
    BackwardEdge { cell: usize, edge: usize, from: usize, to: usize },
    #[error("cell {cell}, edge {edge}: expected edge {expected:?}, found {found:?}")]
    UnexpectedEdge { cell: usize, edge: usize, expected: (usize, usize), found: (usize, usize) },
    #[error("cell {cell}, edge {edge}: selection has {found} entries, search space has {expected}")]
    SelectionLength { cell: usize, edge: usize, expected: usize, found: usize },
    #[error("cell {cell}, edge {edge}: {popcount} operations selected, at most 2 allowed")]
    TooManyOps { cell: usize, edge: usize, popcount: usize },
    #[error("cell {cell}: kind disagrees with reduction positions (listed as reduction: {reduction})")]
    KindMismatch { cell: usize, reduction: bool },
    #[error("reduction position {position} is outside a {cells}-cell genotype")]
    ReductionOutOfRange { position: usize, cells: usize },
    #[error("share group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("share group {group} names cell {cell}, which does not exist")]
    GroupIndexOutOfRange { group: usize, cell: usize },
    #[error("cell {cell} appears in more than one share group")]
    GroupOverlap { cell: usize },
    #[error("cell {cell} belongs to no share group")]
    UngroupedCell { cell: usize },
    #[error("share group {group}: cell {cell} differs from the first cell of the group")]
    GroupNotIdentical { group: usize, cell: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlphaError {
    #[error("alpha table has no cells")]
    NoCells,
    #[error("alpha table for group {group} has {found} edges, the cell DAG has {expected}")]
    EdgeCount { group: usize, expected: usize, found: usize },
    #[error("alpha group {group}, edge {edge}: {found} logits, search space has {expected}")]
    LogitCount { group: usize, edge: usize, expected: usize, found: usize },
    #[error("alpha group {group}, edge {edge}: non-finite logit")]
    NonFinite { group: usize, edge: usize },
    #[error("{found} alpha tables for {expected} share groups")]
    TableCount { expected: usize, found: usize },
    #[error("threshold {0} must lie strictly between 0 and 1")]
    Threshold(f64),
    #[error("hot logit {hot} must exceed cold logit {cold}")]
    HotNotAboveCold { hot: f64, cold: f64 },
    #[error(transparent)]
    Layout(#[from] GenotypeError),
}

/// Errors reading or writing genotype documents. Every variant names where
/// in the document the problem was found.
#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    Malformed { line: usize, column: usize, message: String },
    #[error("unknown operation {name:?} at {path}")]
    UnknownOp { path: String, name: String },
    #[error("invalid value at {path}: {message}")]
    InvalidField { path: String, message: String },
    #[error("invariant violated: {0}")]
    Invariant(#[from] GenotypeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("desired cell count must be at least 1")]
    ZeroCells,
    #[error("cannot expand a {cells}-cell source to {n} cells: {reason}")]
    Underivable { cells: usize, n: usize, reason: &'static str },
    #[error("source reductions must sit at {expected:?} to be expanded, found {found:?}")]
    NonStandardReductions { expected: Vec<usize>, found: Vec<usize> },
    #[error(transparent)]
    Invalid(#[from] GenotypeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("vector lengths differ: {u} vs {v} with {w} weights")]
    LengthMismatch { u: usize, v: usize, w: usize },
    #[error("cells have {left} and {right} steps")]
    StepMismatch { left: usize, right: usize },
    #[error("architectures have {left} and {right} cells")]
    CellCountMismatch { left: usize, right: usize },
    #[error("genotype {index} has {found} cells, expected {expected}")]
    MixedCellCounts { index: usize, expected: usize, found: usize },
}
