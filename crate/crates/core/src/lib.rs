//! Finite-dimensional workbench for Wiener chaos, Malliavin operators, Stein's
//! method for normal approximation and the fourth moment theorem on Dirichlet
//! structures.
//!
//! Everything that can be computed exactly is: moments, variances of Stein
//! kernels and contraction norms come out of chaos or polynomial algebra, and
//! Monte Carlo is only used for empirical distances.

pub mod corpus;
pub mod dirichlet;
pub mod error;
pub mod fbm;
pub mod fourth_moment;
pub mod gaussian_algebra;
pub mod laguerre;
pub mod malliavin;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod stein;
pub mod symmetric_tensor;
pub mod wiener_chaos;

pub use error::{Error, Result};
