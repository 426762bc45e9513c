//! Zero-bias abnormality detection with sequential quickest detection and
//! EWC incremental learning, on synthetic RF emitter data.

pub mod detector;
pub mod error;
pub mod ewc;
pub mod experiment;
pub mod nn;
pub mod seqdetect;
pub mod signal;
pub mod zerobias;

pub use error::{Error, Result};
