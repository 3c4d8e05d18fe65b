//! Wall shear stress (WSS) from synthetic velocity MRI of a 2D stenosed
//! vessel, estimated two ways: directly from the voxels, and by fitting a
//! Navier–Stokes simulation to them (simulation-based imaging).
//!
//! The pipeline runs geometry → mesh → truth flow → voxels → MRI WSS → SBI
//! fit → SBI WSS → error metrics; [`harness`] drives it over parameter
//! sweeps. The guide in `book/` walks through each stage.

pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod lagrange;
pub mod mesh;
pub mod metrics;
pub mod mri;
pub mod mri_wss;
pub mod profile;
pub mod quadrature;
pub mod sbi;
pub mod units;

pub use error::{Error, Result};
