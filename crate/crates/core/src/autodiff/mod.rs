//! Minimal reverse-mode differentiation over the fixed operation set the
//! network needs: linear, bias-add, add/subtract, ReLU, segment max/mean
//! pooling, column concat, row gather, interpolation, dropout and softmax
//! cross-entropy.
//!
//! One [`Tape`] records one forward pass. Parameters come from a
//! [`ParamStore`] and their adjoints are returned as [`Gradients`].
//! Everything else fed into the tape (neighbor indices, sampling selections,
//! interpolation weights, eigenvalue inputs) is a constant of the pass.

mod gradcheck;
mod optim;
mod params;
mod tape;

pub use gradcheck::{grad_check, grad_check_with, GradCheckOptions, GradCheckReport, ParamCheck};
pub use optim::{Optimizer, OptimizerConfig};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tape::{Tape, Var};

pub(crate) use params::seeded_rng;
