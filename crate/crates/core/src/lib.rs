//! Function retrieval for stripped firmware binaries.
//!
//! The pipeline aligns stripped functions to labeled ones by geometry
//! alone ([`align`]), embeds every function in a fixed multi-view space
//! ([`embed`]), summarizes each identity's history ([`prototype`]), and ranks
//! candidates in a target binary ([`retrieve`]). [`eval`] and [`patchproxy`]
//! measure the result; [`synth`] produces corpora to measure it on.

pub mod align;
pub mod config;
pub mod corpus;
pub mod error;
pub mod embed;
pub mod eval;
pub mod index;
pub mod patchproxy;
pub mod prototype;
pub mod retrieve;
pub mod shape;
pub mod synth;

pub use error::{Error, Result};
