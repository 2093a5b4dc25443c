//! Exact simulation of "computing by cooling": a Sherrington–Kirkpatrick
//! problem Hamiltonian is cooled by repeated collisions with transverse-field
//! Ising chains prepared in their ground state, and compared against
//! quench-walk and annealing baselines and measurement-conditioned variants.
//!
//! Module map:
//!
//! - [`spinops`]: sparse Pauli operators, states, partial traces.
//! - [`instances`]: disorder realizations, brute-force ground states, files.
//! - [`hamiltonians`]: problem/driver/bath/coupling builders, bath spectrum.
//! - [`evolve`]: Krylov propagation, quench walk and anneal baselines.
//! - [`collision`]: the repeated-collision cooling engine.
//! - [`measure`]: bath energy measurements, post-selection, stochastic runs.
//! - [`observables`]: energies, fidelity, entropy, magnetization.
//!
//! The `book/` directory next to the workspace root walks through the model
//! chapter by chapter; its code listings are compiled as doctests of this
//! crate.

pub mod collision;
pub mod error;
pub mod evolve;
pub mod hamiltonians;
pub mod instances;
pub mod lanczos;
mod linalg;
pub mod measure;
pub mod observables;
pub mod spinops;

pub use error::{Error, Result};

/// Double-precision complex scalar used throughout.
pub type C64 = num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problem.md")]
    mod problem {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/cooling.md")]
    mod cooling {}
    #[doc = include_str!("../../../book/src/measurement.md")]
    mod measurement {}
    #[doc = include_str!("../../../book/src/magnetization.md")]
    mod magnetization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
