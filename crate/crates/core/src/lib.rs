pub mod buffer;
pub mod collectors;
pub mod env;
pub mod error;
pub mod experiment;
pub mod expert_eval;
pub mod inverse;
pub mod nn;
pub mod ppo;
pub mod rng;

pub use error::{Error, Result};
