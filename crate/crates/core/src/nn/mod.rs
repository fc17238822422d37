//! Feedforward networks with explicit backpropagation, the cosine fraction
//! embedding and the Adam/RMSprop optimizers.

mod embedding;
pub mod io;
mod mlp;
mod optim;

pub use embedding::{cosine_embed, hadamard_combine, CosineEmbedding, DEFAULT_N_COS};
pub use mlp::{Activation, Mlp};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
