//! The guide in `book/` as doc-tests. mdbook cannot link listings against
//! workspace crates, so each chapter is pulled in as a module doc and
//! `cargo test --doc` runs its code blocks.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/meshing.md")]
pub mod meshing {}
#[doc = include_str!("../../../book/src/flow.md")]
pub mod flow {}
#[doc = include_str!("../../../book/src/mri.md")]
pub mod mri {}
#[doc = include_str!("../../../book/src/mri_wss.md")]
pub mod mri_wss {}
#[doc = include_str!("../../../book/src/sbi.md")]
pub mod sbi {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
