pub mod compose;
pub mod demos;
pub mod envs;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod pretrain;
pub mod replay;
pub mod rl;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
