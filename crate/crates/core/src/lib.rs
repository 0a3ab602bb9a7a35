//! Numerical solver and estimate monitors for the time-dependent mean-field
//! game system with subquadratic Hamiltonian and power coupling on the flat
//! torus.
//!
//! The numerical kernels are generic over the scalar type through [`Real`];
//! concrete `f64` aliases are exported at the crate root for the common case.

// `!(x > 0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod coupling;
pub mod driver;
pub mod error;
pub mod estimates;
pub mod exponents;
pub mod field;
pub mod grid;
pub mod hamiltonian;
pub mod norms;
pub mod ops;
pub mod scalar;
pub mod solvers;
pub mod spectral;

pub use error::{MfgError, Result};
pub use scalar::Real;

pub type TorusGrid64 = grid::TorusGrid<f64>;
pub type Field64 = field::Field<f64>;
pub type VectorField64 = field::VectorField<f64>;
pub type Trajectory64 = field::Trajectory<f64>;
pub type HamiltonianModel64 = hamiltonian::HamiltonianModel<f64>;
pub type Mollifier64 = coupling::Mollifier<f64>;
pub type CouplingParams64 = coupling::CouplingParams<f64>;
pub type MfgProblem64 = driver::MfgProblem<f64>;
pub type MfgSolution64 = driver::MfgSolution<f64>;
pub type ExponentWitness64 = exponents::ExponentWitness<f64>;
