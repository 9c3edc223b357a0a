//! Phase-reduced networks of weakly coupled oscillators: coupling functions,
//! phase and pulse dynamics, equilibria, stability tests and Monte Carlo
//! experiments.

pub mod cli;
pub mod config;
pub mod coupling;
pub mod dynamics;
pub mod equilibria;
pub mod experiments;
pub mod error;
pub mod graph;
pub mod numerics;
pub mod stability;

pub use error::{Error, Result};
