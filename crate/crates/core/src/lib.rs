pub mod audio;
pub mod augment;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod rng;
pub mod roomsim;
pub mod ssl;

pub use error::{Error, Result};
