//! Quaternion scalars, plane-major tensors and split activations.

mod activation;
mod quaternion;
mod tensor;

pub use activation::{split_activation, Activation};
pub(crate) use activation::sigmoid;
pub use quaternion::{conjugate, hamilton_product, norm, normalize, to_real_matrix, Quaternion, RealMat4};
pub use tensor::{qmatmul, qmatmul_acc, Algebra, ProductTerm, Tensor};
