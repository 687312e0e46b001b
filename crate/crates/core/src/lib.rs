//! Entropic interpolations (Schrödinger bridges) on 1D/2D grids and
//! numerical checks of entropy-power concavity along them.
//!
//! The pipeline is: build a [`grid::Grid`], attach a
//! [`calculus::GeometryConfig`], build the [`semigroup::SemigroupOperator`],
//! solve the Schrödinger system with [`bridge::solve_schrodinger`], then
//! sample the entropy-power curve with [`verdict::build_curve`].

pub mod bridge;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod oracles;
pub mod semigroup;
pub mod verdict;

pub use error::{Error, Result};
