pub mod cli;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod matching;
pub mod numerics;
pub mod propensity;
pub mod sdr;
pub mod simulation;

pub use error::{Error, Result};
