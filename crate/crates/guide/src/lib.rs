//! Runs the code snippets of the guide in `book/` as doc-tests.
//!
//! mdbook cannot link against workspace crates when testing, so each chapter is
//! included here as the documentation of an empty module.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/rotary.md")]
pub mod rotary {}
#[doc = include_str!("../../../book/src/video.md")]
pub mod video {}
#[doc = include_str!("../../../book/src/cameras.md")]
pub mod cameras {}
#[doc = include_str!("../../../book/src/hybrid.md")]
pub mod hybrid {}
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
#[doc = include_str!("../../../book/src/trajectories.md")]
pub mod trajectories {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
