#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation toolkit for gate-defined quantum-dot arrays: screened
//! electron-electron interactions from gate geometry, extended Fermi-Hubbard
//! exact diagonalisation, artificial atoms and molecules, and
//! charge-stability diagram fitting.

pub mod electrostatics;
pub mod error;
pub mod experiment;
pub mod hubbard;
pub mod qchem;
pub mod quadrature;
pub mod special;
pub mod stability;
pub mod units;
pub mod wannier;

pub use error::{Error, Result};
