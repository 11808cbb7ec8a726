//! Primitive layers with explicit forward and backward passes.
//!
//! Each forward returns its output together with a cache holding the intermediates the
//! matching backward needs. Caches are moved into the backward call, so each is used once.

pub mod activation;
pub mod conv1d;
pub mod dense;
pub mod dropout;
pub mod lstm;
pub mod pool;

use serde::{Deserialize, Serialize};

pub use activation::{activation_backward, activation_forward, Activation, ActivationCache};
pub use conv1d::{conv1d_backward, conv1d_forward, Conv1dCache, Conv1dGrads, Conv1dLayer};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseLayer};
pub use dropout::{dropout_backward, dropout_forward, DropoutCache, DropoutLayer};
pub use lstm::{lstm_backward, lstm_forward, Gate, LstmCache, LstmCell, LstmGrads};
pub use pool::{maxpool1d_backward, maxpool1d_forward, PoolCache};

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}
