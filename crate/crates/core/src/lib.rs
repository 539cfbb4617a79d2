//! Resonance algebras generated by commensurable harmonic-oscillator frequencies.
//!
//! The crate covers integer resonance combinatorics ([`lattice`]), the classical Poisson
//! algebra ([`poisson`]), Fock-space representations ([`fock`]), operator averaging
//! ([`averaging`]), spectral asymptotics ([`spectral`]) and precession dynamics
//! ([`precession`]). [`acceptance`] bundles the end-to-end checks.

pub mod acceptance;
pub mod averaging;
pub mod error;
pub mod fock;
pub mod io;
pub mod lattice;
pub mod numerics;
pub mod poisson;
pub mod poly;
pub mod precession;
pub mod spectral;
pub mod tolerances;

pub use error::{Error, Result};
pub use lattice::{FrequencySystem, MinimalBasis, PrimeSystem, ResonancePair};
pub use poly::{Poly, C64};
