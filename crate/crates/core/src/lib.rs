//! Single-excitation quantum optics of emitters coupled to tight-binding
//! photonic lattices with flat bands.
//!
//! The crate is organized bottom-up: [`lattice`] builds models,
//! [`spectrum`] and [`greens`] diagonalize them, [`boundstate`] solves the
//! atom-photon bound-state problem, [`flatband`] holds the compact
//! localized state algebra, and [`interactions`], [`giant`] and
//! [`dynamics`] build on those.

pub mod boundstate;
pub mod dynamics;
pub mod error;
pub mod flatband;
pub mod giant;
pub mod greens;
pub mod interactions;
pub mod io;
pub mod lattice;
mod linalg;
pub mod spectrum;

pub use error::{Error, Result};
pub use lattice::C64;
pub use linalg::{eigh, pairwise_sum};
