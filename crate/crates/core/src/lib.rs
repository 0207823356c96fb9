//! Projective differential geometry on coordinate charts: symbolic
//! expressions, tensor calculus, tractor bundle connections and their
//! parallel transport.

pub mod expr;
pub mod scalar;
pub mod tensor;

pub use expr::{parse, Expr};
pub use scalar::{Coefficient, Scalar};
pub use tensor::{PointTensor, Tensor, TensorError, TensorField};
pub mod geometry;
pub mod projective;
pub mod tractor;
pub mod transport;
