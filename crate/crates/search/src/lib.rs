//! Continuous side of the search: a small autodiff-backed supernet, the
//! per-cell architecture optimizers and the losses that drive them.
//!
//! * [`engine`]: the bi-level search loop in its four modes.
//! * [`train`]: plain training of a discrete genotype.
//! * [`opscore`]: per-operation importance scores on a proxy network.
//! * [`checkpoint`]: binary tensor blobs next to genotype documents.

pub mod checkpoint;
pub mod data;
pub mod engine;
pub mod error;
pub mod loss;
pub mod network;
pub mod opscore;
pub mod optim;
pub mod train;

pub use data::{Dataset, SyntheticSpec};
pub use engine::{search, EpochMetrics, Mode, SearchConfig, SearchOutcome, SearchState, SharePolicy};
pub use error::{FormatError, SearchError};
pub use loss::LossConfig;
pub use network::{Arch, Network, NetworkSpec};
pub use train::{train_discrete, TrainConfig, TrainOutcome};
