//! Numerical engine for free-fermion brick-wall circuits built from a supersymmetric
//! two-qubit matchgate.
//!
//! - [`gate_core`]: the gate Š(α, γ, θ), boundary gate K(θ), free-fermion exponent.
//! - [`gaussian`]: Majorana-basis tools for quadratic operators and Gaussian unitaries.
//! - [`graded_dense`]: small-L dense oracle with graded (fermionic) embeddings, the full
//!   circuit unitary, supercharges, Yang–Baxter and transfer-matrix checks.
//! - [`hamiltonian_limit`]: the θ → 0 Hamiltonians H₀ and H_γ, BdG blocks and dispersions.
//! - [`topology`]: P/T/C symmetries, chiral off-diagonalization and winding numbers.
//! - [`spectral_ubw`]: momentum-sector spectra of the circuit unitary.
//! - [`quench_dynamics`]: exact Gaussian quench dynamics, GGE and drift velocities.

pub mod error;
pub mod fock;
pub mod gate_core;
pub mod gaussian;
pub mod graded_dense;
pub mod hamiltonian_limit;
pub mod linalg;
pub mod quench_dynamics;
pub mod spectral_ubw;
pub mod topology;

pub use error::{Error, Result};
pub use gate_core::GateParams;
pub use num_complex::Complex64 as C64;
