//! Skew-product flows over quasi-periodic bases: attractors, the dynamical
//! spectrum, block-diagonalization, integral manifolds and reduction.

pub mod attractor;
pub mod base_flow;
pub mod benchmarks;
pub mod cocycle;
pub mod config;
pub mod error;
pub mod expr;
pub mod grid;
pub mod ode;
pub mod output;
pub mod reduction;
pub mod scenario;
pub mod spectrum;

pub use error::{Error, Result};
