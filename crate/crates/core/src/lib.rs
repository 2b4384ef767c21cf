//! Exact finite-volume simulation of disordered, interacting lattice fermions
//! driven by electromagnetic pulses.

pub mod config;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod thermo;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
