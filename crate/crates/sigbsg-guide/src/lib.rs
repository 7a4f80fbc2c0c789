//! Compiles the guide's code samples as doc-tests so `cargo test` keeps
//! `book/` in sync with the library. mdBook cannot inject crate
//! dependencies into its own test runner, so each chapter is included here
//! as module documentation and rustdoc runs the fences.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/games.md")]
pub mod games {}

#[doc = include_str!("../../../book/src/signaling.md")]
pub mod signaling {}

#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}

#[doc = include_str!("../../../book/src/solvers.md")]
pub mod solvers {}

#[doc = include_str!("../../../book/src/learning.md")]
pub mod learning {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
