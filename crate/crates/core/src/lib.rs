//! Supersymmetric fermion lattice systems at desk scale.
//!
//! * [`car`]: exact symbolic CAR algebra on `Z^nu`.
//! * [`supercharge`]: local supercharge assignments and their superderivations.
//! * [`dynamics`]: finite-volume Lie-series time evolution with certified tails.
//! * [`fock`]: Jordan-Wigner representation and finite-volume SUSY checks.
//! * [`qft`]: truncated Fock model of the free supersymmetric field.
//! * [`model`], [`suite`]: model files and the verification suite.

pub mod car;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod model;
pub mod qft;
pub mod scalar;
pub mod suite;
pub mod supercharge;

pub use error::{Result, SusyError};
