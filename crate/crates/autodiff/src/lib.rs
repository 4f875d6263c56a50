//! Dense `f64` tensors with tape-based reverse-mode differentiation, sized for
//! toy-scale architecture search on a CPU.
//!
//! ```
//! use ddarts_autodiff::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.param(Tensor::vector(vec![1.0, -2.0, 3.0]));
//! let y = g.square(x);
//! let loss = g.sum(y);
//! g.backward(loss);
//! assert_eq!(g.grad(x).unwrap(), &[2.0, -4.0, 6.0]);
//! ```

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod params;
pub mod primitive;
pub mod tensor;

pub use error::AutodiffError;
pub use graph::{Graph, Var, NORM_EPS};
pub use kernels::Conv2dSpec;
pub use params::{Binding, ParamId, ParamStore};
pub use primitive::{mixed_edge, mixed_edge_softmax, weighted_sum, ConvShape, ConvStage, FactorizedReduce, Norm, PrimitiveOp};
pub use tensor::Tensor;
