//! Numeric substrate: dense matrices, a reverse-mode tape, layer primitives,
//! and the RMSprop optimizer.

pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod tape;
mod tensor;

pub use layers::{Activation, Dense, Mlp, MlpVars, RffLayer};
pub use optim::{Rmsprop, RmspropConfig};
pub use tape::{Grads, Tape, VarId};
pub use tensor::Tensor2;
