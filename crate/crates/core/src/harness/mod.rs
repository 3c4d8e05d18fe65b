//! Sweep driver: configuration, per-cell runs, result tables and plot data.

pub mod config;
pub mod export;
pub mod results;
pub mod run;
pub mod verify;

pub use config::{noise_seed, Cell, GeometryConfig, SweepConfig, STENOSIS_MESHES};
pub use export::{export_plots, linear_fit, Family, LinearFit};
pub use results::{read_results, summarize, ResultRow, SummaryRow};
pub use run::{build_space, compute_cell, run_single, run_sweep, RunRecord, Study, SweepOutcome};
pub use verify::{run_checks, Check};
