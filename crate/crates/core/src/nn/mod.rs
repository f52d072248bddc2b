//! Small reverse-mode autodiff: dense `f64` tensors, a define-by-run graph,
//! a GRU cell, Adam and a finite-difference checker.

mod adam;
mod gradcheck;
mod graph;
mod gru;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GRAD_CHECK_FLOOR};
pub use graph::{Gradients, Graph, Var};
pub use gru::GruVars;
pub use params::{Bound, GradMap, ParamSet, PARAM_FORMAT_VERSION};
pub use tensor::Tensor;
