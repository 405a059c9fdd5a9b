//! From-scratch recurrent classifiers: LSTM and GRU cells, optional
//! bidirectional composition, pooling and a softmax head, with exact
//! backpropagation through time.

mod cell;
pub mod checkpoint;
mod gradcheck;
mod model;
mod tensor;

pub use cell::{Cell, GruCell, LstmCell, GRU_GATES, LSTM_GATES};
pub use gradcheck::{grad_check, grad_check_against};
pub use model::{
    Architecture, CellKind, ForwardCache, GradientSet, HiddenStates, Pooling, RecurrentClassifier,
};
pub use tensor::{cast, log_sum_exp, sigmoid, softmax, Matrix, Real};
