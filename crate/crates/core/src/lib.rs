//! Entanglement production in weakly coupled kicked quantum maps.
//!
//! Two kicked tops (spin `j`) or two kicked rotors (on the 2π torus) evolve
//! under `|Ψ(t+1)⟩ = U_ε U₁ U₂ |Ψ(t)⟩`. The crate computes the exact linear
//! entropy of one subsystem, its second-order prediction from uncoupled
//! Heisenberg correlations, the `Γ₀ coth(γ/2)` production-rate law, and
//! Husimi functions of reduced density matrices on the sphere.

// `!(x > 0.0)` is used deliberately so that NaN is rejected with the other
// invalid values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod husimi;
pub mod linalg;
pub mod perturbation;
pub mod rotor;
pub mod runner;
pub mod top;

pub use error::{Error, Result};
