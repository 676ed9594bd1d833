//! Dense arrays, a reverse-mode tape, and Adam.

mod adam;
mod array;
mod gradcheck;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use array::Array;
pub use gradcheck::{grad_check, layer_checks};
pub use tape::{activate, affine_forward, conv1d_forward, Activation, Gradients, Tape, Var, LEAKY_SLOPE};
