//! Numerical substrate: parameters, LSTM cells, softmax cross-entropy, SGD,
//! finite-difference gradient checks and checkpoints. All arithmetic is f64.

mod backend;
mod checkpoint;
mod gradcheck;
mod loss;
mod lstm;
mod optim;
mod params;

pub use backend::{Backend, Eval, Graph, NodeId};
pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, RELATIVE_FLOOR};
pub use loss::{log2_softmax, log_sum_exp, masked_softmax, softmax_xent};
pub use lstm::{lstm_step, Lstm, LstmLayer, LstmLm, LstmState, FORGET_BIAS, INIT_SCALE};
pub use optim::{sgd_step, StepDecay};
pub use params::{Gradients, NamedTensor, ParamId, Params, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension { what: String, expected: usize, found: usize },
    #[error("non-finite gradient for parameter `{param}`")]
    NonFinite { param: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
