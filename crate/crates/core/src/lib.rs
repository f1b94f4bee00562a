//! Finite-horizon coherent quantum LQG synthesis for linear quantum plants.
//!
//! The crate is layered bottom-up:
//!
//! - [`foundations`]: CCR matrices, structured projections, Kronecker algebra.
//! - [`operators`]: grade-r operators `⟦α₁,β₁|…|α_r,β_r⟧` and their inversion.
//! - [`model`]: plants, physically realizable controllers, closed loops.
//! - [`dynamics`]: Lyapunov integrators for `P`, `Q`, `Θ`, Hankelian and cost.
//! - [`gains`]: the operators `𝔐`, `𝔑`, optimal gains and control Hamiltonian.
//! - [`bvp`]: damped fixed-point solution of the split boundary value problem.
//! - [`scenarios`]: seeded benchmark scenarios.
//! - [`verify`]: executable certificates for the structural invariants.

pub mod bvp;
pub mod dynamics;
pub mod error;
pub mod foundations;
pub mod gains;
pub mod model;
pub mod operators;
pub mod random;
pub mod scenarios;
pub mod verify;

pub use error::{Error, Result};
pub use foundations::{canonical_ccr, CcrMatrix, Matrix};
pub use operators::{GradeROperator, SolveMode};
