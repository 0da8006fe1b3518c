//! Desk-scale laboratory for imitation attacks on black-box classifiers under
//! domain shift.
//!
//! Victim models are trained on a source domain and served through metered,
//! optionally defended endpoints. Attackers harvest labels for their own
//! target-domain inputs from one or more endpoints and train an imitation model.
//! The `analysis` module measures risks, checks the domain-adaptation and
//! defense-distortion bounds, and prices the attack against human annotation.

pub mod analysis;
pub mod attacker;
pub mod data;
pub mod error;
pub mod harness;
pub mod models;
pub mod rng;
pub mod victim;

pub use error::{Error, Result};
