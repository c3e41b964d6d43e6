//! Lifting operators for lattice Boltzmann models of advection-diffusion.
//!
//! A lifting operator maps a density field to a full set of lattice Boltzmann
//! populations. This crate provides the equilibrium lift, the analytic
//! Chapman-Enskog expansion, constrained runs and a numerically trained
//! Chapman-Enskog expansion, plus an FTCS/LBM hybrid that uses them at its
//! interfaces.

pub mod error;
pub mod experiment;
pub mod hybrid;
pub mod lattice;
pub mod lift_analytic;
pub mod lift_cr;
pub mod lift_nce;
mod linalg;
pub mod macro_pde;
pub mod stencil;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/analytic.md")]
    mod analytic {}
    #[doc = include_str!("../../../book/src/constrained_runs.md")]
    mod constrained_runs {}
    #[doc = include_str!("../../../book/src/nce.md")]
    mod nce {}
    #[doc = include_str!("../../../book/src/hybrid.md")]
    mod hybrid {}
}
