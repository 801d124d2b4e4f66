//! Diversity analysis for classifier ensembles built from prediction records.
//!
//! The crate never touches model weights. It loads aligned predictions of a
//! model pool over named evaluation sets ([`store`]), measures pairwise and
//! ensemble-level diversity ([`metrics`]), builds and ranks teams around a
//! protected target model ([`teams`]), combines member outputs
//! ([`consensus`]) and evaluates teams over benign and adversarial sets
//! ([`eval`]). [`synth`] generates pools with controlled accuracy and error
//! correlation for testing.

pub mod consensus;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod rank;
pub mod store;
pub mod synth;
pub mod teams;

pub use error::{Error, Result};
