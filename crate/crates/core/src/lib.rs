//! Nonholonomic mechanics on semidirect products: constraint families,
//! reduced Dirac structures and structure-preserving integrators for the
//! Euler–Poincaré–Suslov and Lie–Poisson–Suslov equations.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64` for everyday use.

pub mod cli;
pub mod constraints;
pub mod diracgeom;
pub mod dynamics;
pub mod linalg;
pub mod liealg;
pub mod models;
pub mod scalar;

pub use scalar::Real;

pub type Vector64 = linalg::Vector<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Vector32 = linalg::Vector<f32>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type LieAlgebra64 = liealg::LieAlgebra<f64>;
pub type SemidirectAlgebra64 = liealg::SemidirectAlgebra<f64>;
pub type ConstraintFamily64 = constraints::ConstraintFamily<f64>;
pub type ReducedSystem64 = dynamics::ReducedSystem<f64>;
pub type HamiltonianSystem64 = dynamics::HamiltonianSystem<f64>;
pub type ReducedState64 = dynamics::ReducedState<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type ReducedSystem32 = dynamics::ReducedSystem<f32>;
