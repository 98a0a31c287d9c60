//! Scale-invariant temporal history (SITH) as a working memory for
//! Q-learning agents, with FIFO and exponential-decay baselines and the
//! Catch / Hidden Catch environments used to compare them.

pub mod catch;
pub mod error;
pub mod harness;
pub mod laplace;
pub mod memory;
pub mod qnet;
pub mod rng;

pub use error::{Error, Result};
