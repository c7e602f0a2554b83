//! Solvers for finite Markov decision processes whose secondary reward
//! must dominate a benchmark in the increasing concave (or convex) order.

pub mod alp;
pub mod average;
pub mod chain;
pub mod cli;
pub mod discounted;
pub mod dominance;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod lp;
pub mod mdp;
pub mod occupation;
pub mod portfolio;
pub mod simulate;

pub use error::{Error, Result};
