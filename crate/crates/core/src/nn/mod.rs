//! Minimal dense network: ReLU hidden layers, a regular or zero-bias head,
//! softmax cross-entropy and plain mini-batch SGD.

mod matrix;
mod network;
mod train;

pub use matrix::{axpy, dot, norm, Matrix};
pub use network::{
    argmax, cross_entropy, softmax, softmax_row, Activation, DenseLayer, ForwardCache, Head,
    HeadKind, ModelFile, Network, ParamRole, ParamSegment, SnapshotSection, MODEL_FORMAT_VERSION,
};
pub(crate) use network::glorot;
pub use train::{
    accuracy, gradient_check, gradient_check_fn, predict, relative_error, train, EpochStats,
    TrainConfig,
};
pub(crate) use train::{batch_matrix, run_epoch, StepControl};

/// Default hidden widths of the desk-scale classifier.
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];
