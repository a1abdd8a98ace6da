//! Dense f64 tensors, a reverse-mode tape, first-order optimizers and the
//! seeded random streams every model trains on.

pub mod gradcheck;
mod optim;
mod rng;
mod tape;
mod tensor;

pub use optim::{OptimizerKind, OptimizerState};
pub use rng::{SeedStream, StreamRng};
pub use tape::{backward, Gradients, NodeId, Tape};
pub use tensor::{cross_entropy, dropout, matmul, softmax, Tensor};

/// Probability floor applied before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;
