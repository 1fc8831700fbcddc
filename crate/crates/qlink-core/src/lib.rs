//! Simulation core for qubit-to-qubit communication through a lossy
//! multimode channel: dark-state (adiabatic) and relay protocols, a Lindblad
//! integrator, tomography and fidelity metrics, and lumped-circuit loss models.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod circuit;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod schedules;
pub mod statespace;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
