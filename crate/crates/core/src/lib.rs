//! Network Newton (NN-K) and decentralized gradient descent on a simulated
//! network of agents, with dense verification oracles for every spectral
//! bound used in the convergence analysis.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod objectives;
pub mod penalty;
pub mod solver;
pub mod topology;

pub use error::{Error, Result};
