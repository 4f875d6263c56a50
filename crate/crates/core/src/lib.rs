//! Discrete side of distributed differentiable architecture search.
//!
//! * [`genotype`]: operations, edges, cells and genotypes, with their invariants.
//! * [`space`]: exact search-space sizes.
//! * [`alpha`] and [`parse`]: continuous architecture logits and their
//!   discretization into genotypes.
//! * [`handcrafted`]: ResNet and Xception encodings used as warm starts.
//! * [`document`]: the JSON genotype document format.
//! * [`derive`]: expansion of a searched network to more cells.
//! * [`metric`]: weighted Hamming / Hausdorff distance between architectures.

pub mod alpha;
pub mod derive;
pub mod document;
pub mod error;
pub mod genotype;
pub mod handcrafted;
pub mod metric;
pub mod op;
pub mod parse;
pub mod space;

pub use alpha::{genotype_to_alpha, AlphaTable};
pub use derive::{derive_genotype, derive_indices};
pub use error::{AlphaError, DeriveError, DocumentError, GenotypeError, MetricError};
pub use genotype::{random_genotype, CellKind, CellSpec, EdgeSpec, Genotype};
pub use handcrafted::{encode_handcrafted, Handcrafted};
pub use metric::{hamming, hausdorff_cell, metric_m, pairwise_matrix, plateau_stop, DistanceTrace, HammingWeights, PlateauRule};
pub use op::{OpKind, OpScoreTable, SearchSpace};
pub use parse::{parse_alpha, ParseMethod, DEFAULT_THRESHOLD};
pub use space::{search_space_size, total_space_size};
