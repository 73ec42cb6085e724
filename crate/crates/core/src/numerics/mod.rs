//! Dense linear algebra, activations, PCA and seeded randomness.

mod dd;
mod linalg;
mod pca;
mod rng;

pub use linalg::{
    elementwise_mul, matvec, sigmoid, sigmoid_scalar, softmax, tanh, Matrix, Vector,
};
pub use dd::Dd;
pub use pca::{pca_apply, pca_fit, PcaTransform};
pub use rng::{seeded_rng, uniform, Rng};
