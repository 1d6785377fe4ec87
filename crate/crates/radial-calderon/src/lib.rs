//! Numerical toolkit for the radial Calderón problem on the unit ball:
//! Dirichlet-to-Neumann spectra of radial Schrödinger potentials, the Born
//! approximation built from a spectrum, layer-stripping reconstruction of
//! the potential, and quantitative checks of stability and approximation
//! estimates.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod born;
pub mod cli;
pub mod forward;
pub mod interp;
pub mod io;
pub mod ode;
pub mod potentials;
pub mod quad;
pub mod reconstruct;
pub mod special;
