//! Dense matrices, tape-based reverse-mode differentiation, MLPs, Adam and
//! finite-difference validation.

pub mod checkpoint;
pub mod gradcheck;
mod matrix;
pub mod mlp;
pub mod params;
pub mod tape;

pub use gradcheck::{finite_difference_check, GradCheckOptions, GradCheckReport};
pub use matrix::{matmul, Matrix};
pub use mlp::{Mlp, MlpInput, MlpSpec};
pub use params::{AdamConfig, ParamGrads, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
