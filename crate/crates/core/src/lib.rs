//! Damped quantum spin dynamics with a norm-conserving non-Hermitian
//! Schrödinger equation, next to classical Landau-Lifshitz(-Gilbert)
//! integration of the same spin chain.
//!
//! Units: `ħ = 1`; magnetic moments are absorbed into the field strengths.

pub mod classical;
pub mod error;
pub mod integrator;
pub mod model;
pub mod observables;
pub mod quantum;
pub mod scenario;
pub mod spin_algebra;

pub use error::{Error, Result};
pub use integrator::{EquationForm, IntegratorConfig};
pub use model::{Hamiltonian, NoiseSpec, PulseSpec, SystemSpec};
pub use quantum::{DensityMatrix, StateVector};
pub use spin_algebra::{ComplexMatrix, Spin};
