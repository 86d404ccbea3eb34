//! Desk-scale test bed for linguistically guided audio-visual target speech
//! extraction. See the `examples/` directory for runnable entry points into
//! each capability.

pub mod engine;
pub mod error;
pub mod lmcore;
pub mod seeds;
pub mod signal;
pub mod simkit;

pub use error::{Error, Result};
