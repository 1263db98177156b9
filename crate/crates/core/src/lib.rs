//! Discovery and replay of affine metamorphic relations.
//!
//! The bundled application under test is a surface kinetic-energy diagnostic
//! ([`kernel`]). Candidate input transformations are affine maps on the flat
//! state vector ([`relations`]), scored by a duplicate-penalised invariance
//! cost ([`cost`]) and found by stochastic hill climbing with restarts
//! ([`search`]).

pub mod cost;
pub mod error;
pub mod exec;
pub mod kernel;
pub mod relations;
pub mod search;

pub use error::{Error, Result};
