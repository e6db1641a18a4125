//! Non-Markovian time-local master equations, quantum Fisher information and
//! the decomposition of its flow into per-channel subflows.

pub mod model;
pub mod operators;
pub mod propagation;
pub mod estimation;
pub mod flow;
pub mod cli;

#[cfg(test)]
use operators::{hermitize, ComplexMatrix, C64};

#[cfg(test)]
#[path = "../tests/common/random.rs"]
mod testutil;
