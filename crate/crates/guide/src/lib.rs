//! The book under `book/` rendered as rustdoc, one module per chapter.
//!
//! This crate exists so every code sample in the book is compiled and run
//! by `cargo test`: a sample that drifts from the library API fails the
//! build instead of rotting in prose.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/mdp-finite.md")]
pub mod mdp_finite {}

#[doc = include_str!("../../../book/src/mdp-limits.md")]
pub mod mdp_limits {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/config.md")]
pub mod config {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/artifacts.md")]
pub mod artifacts {}
