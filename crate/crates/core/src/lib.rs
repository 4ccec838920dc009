pub mod agents;
pub mod bias;
pub mod experiment;
pub mod envs;
pub mod error;
pub mod gaussian_bias;
pub mod nn;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
