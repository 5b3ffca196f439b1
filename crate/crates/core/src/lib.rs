//! Capacity per unit-energy of Rayleigh-fading channels observed through a
//! one-bit quantizer.
//!
//! Probabilities live in [`Probability`], a log-domain value, so that
//! divergences stay accurate when a bit is almost never set. The searches in
//! [`cue`] return a [`cue::CueResult`] that carries its own bound checks.

mod error;
pub mod specfun;

pub use error::{Error, Result};
pub use specfun::Probability;
pub mod capacity;
pub mod channel;
pub mod cue;
pub mod optimize;
pub mod quadrature;
pub mod verify;
