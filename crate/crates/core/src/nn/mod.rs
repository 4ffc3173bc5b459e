//! Minimal neural-network substrate: dense layers, a gated recurrent cell,
//! reverse-mode gradients over a recorded tape, and Adam.

mod adam;
pub(crate) mod kernels;
mod layers;
mod matrix;
mod params;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use layers::{Activation, DenseNet, Recurrent, RecurrentState};
pub use matrix::Matrix;
pub use params::{Grads, ParamId, ParamSet};
pub use tape::{Tape, Var};

/// Global-norm limit applied to every model's gradients before Adam.
pub const GRAD_CLIP_NORM: f64 = 5.0;
