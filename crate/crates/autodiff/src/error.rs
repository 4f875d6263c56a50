use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutodiffError {
    #[error("shape {shape:?} needs {} values, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: expected input shape {expected}, got {found:?}")]
    ShapeMismatch { op: String, expected: String, found: Vec<usize> },
    #[error("cannot configure {op}: {reason}")]
    Unconfigured { op: String, reason: String },
    #[error("{ops} operations but {weights} mixing weights")]
    MixLength { ops: usize, weights: usize },
    #[error("target class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
}
