//! Ancilla-free quantum lattice Boltzmann method (AFQLBM) for linear
//! advection-diffusion.
//!
//! The crate bundles a small dense statevector simulator ([`qsim`]), the
//! classical single-relaxation-time LBM used as the oracle ([`lattice`]), the
//! D1Q3/D2Q5 circuit builders and post-selected loop driver ([`afqlbm`]),
//! macroscopic readout from amplitudes or shot counts ([`readout`]), a
//! reconstruction of the older ancilla-based D1Q2 scheme ([`legacy`]),
//! gate-resource accounting ([`analysis`]) and the experiment front end
//! ([`cli`]).
//!
//! Bit ordering is most-significant-first everywhere: qubit 0 is the most
//! significant bit of a basis index, the direction register `q` sits above
//! the position register `d`, and in two dimensions the x block sits above
//! the y block. A D2Q5 basis index is therefore `q << 2n | x << n | y`.

pub mod afqlbm;
pub mod analysis;
pub mod cli;
mod error;
pub mod lattice;
pub mod legacy;
pub mod qsim;
pub mod readout;

pub use error::{Error, Result};
