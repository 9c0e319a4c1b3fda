//! Sparse Bayesian estimation for Kronecker-structured complex linear
//! inverse problems, with a massive-MIMO channel simulator and a Monte Carlo
//! sweep harness.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod numerics;
pub mod selftest;

pub use error::{Error, Result};
