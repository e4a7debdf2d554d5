//! Bloch band structures of the one-dimensional fractional Schrodinger
//! equation in periodic rectangular potentials.
//!
//! The kinetic operator carries the Fourier symbol |k|^q / 2 with Levy index
//! q in [1, 3]; q = 2 recovers the standard Schrodinger equation. The crate
//! computes per-k Bloch eigenstates by imaginary-time split-step evolution
//! (cross-checked against a plane-wave diagonalization), assembles and
//! post-processes dispersions E_n(k), refines discrete bands with Gaussian
//! process regression to locate migrating band minima, and fits the power
//! laws that characterize band inversion, gap kinks, and effective-mass
//! decay. The `harness` module adds sweep orchestration, JSON/CSV
//! persistence, and the pieces behind the `fracband` command-line tool.
//!
//! Run `cargo run --example band_structure` (or any other example) for a
//! guided tour of a single capability.

pub mod analysis;
pub mod bands;
pub mod error;
pub mod gpr;
pub mod harness;
pub mod lattice;
pub mod solver;

pub use error::{Error, Result};
