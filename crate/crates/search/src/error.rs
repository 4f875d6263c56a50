use thiserror::Error;

use ddarts_autodiff::AutodiffError;
use ddarts_core::metric::TraceError;
use ddarts_core::{AlphaError, DocumentError, GenotypeError, MetricError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("diverged at epoch {epoch}: {what} is {value}")]
    Divergence { epoch: usize, what: &'static str, value: f64 },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error(transparent)]
    Genotype(#[from] GenotypeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic number {found:#010x}")]
    Magic { found: u32 },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("truncated input: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
