//! Quick oracle checks run by `wss-sbi verify`. Each check is small enough
//! to finish in seconds on one core; the full acceptance runs live in the
//! test suite.

use std::sync::Arc;

use serde::Serialize;

use super::config::{Cell, SweepConfig};
use super::run::{build_space, compute_cell, Study};
use crate::error::Result;
use crate::fem::{compute_wss, inflow_profile, reynolds_to_theta, solve_steady_ns, wall_traction, FluidProps, SolverOptions};
use crate::geometry::{Geometry, GeometrySpec};
use crate::metrics::build_gamma;
use crate::mri::{add_noise, PsfOperator, ScanRegion, VoxelData, VoxelGrid};
use crate::profile::Method;
use crate::sbi::{OptimizerSettings, SbiProblem};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn below(name: &'static str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            passed: value.is_finite() && value < tolerance,
            value,
            tolerance,
            detail,
        }
    }

    fn failed(name: &'static str, err: impl std::fmt::Display) -> Self {
        Self {
            name,
            passed: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: err.to_string(),
        }
    }
}

const COARSE_H: f64 = 0.123;

/// Runs every check; errors inside a check are reported as failures.
pub fn run_checks() -> Vec<Check> {
    let checks: [(&'static str, fn() -> Result<Check>); 6] = [
        ("poiseuille", poiseuille),
        ("traction_identity", traction_identity),
        ("adjoint_gradient", adjoint_gradient),
        ("noise_std", noise_std),
        ("psf_normalization", psf_normalization),
        ("determinism", determinism),
    ];
    checks
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| Check::failed(name, e)))
        .collect()
}

/// Straight channel at Re = 1000: nodal velocities against the parabola
/// and the wall stress against `μ·2θ/B0`.
pub fn poiseuille() -> Result<Check> {
    let spec = GeometrySpec::straight(0.3, 0.0, 1.2);
    let geometry = Geometry::Channel(spec);
    let space = Arc::new(build_space(&geometry, 0.1)?);
    let props = FluidProps::blood();
    let theta = reynolds_to_theta(1000.0, geometry.diameter(), &props)?;
    let sol = solve_steady_ns(&space, &props, theta, &SolverOptions::default(), None)?;
    let mut err: f64 = 0.0;
    for (k, p) in space.mesh.nodes.iter().enumerate() {
        let exact = inflow_profile(p[1], theta, spec.b0);
        let v = sol.velocity_at_node(k);
        err = err.max((v[0] - exact[0]).abs().max(v[1].abs()) / theta);
    }
    let region = ScanRegion {
        x_min: 0.2,
        x_max: 1.0,
        y_min: -0.3,
        y_max: 0.3,
    };
    let gamma = build_gamma(&geometry, &region, 50)?;
    let wss = compute_wss(&sol, &gamma, Method::Truth)?;
    let exact = props.mu_dyn() * 2.0 * theta / spec.b0;
    let wss_err = wss.wss.iter().map(|w| (w - exact).abs() / exact).fold(0.0, f64::max);
    Ok(Check {
        name: "poiseuille",
        passed: err < 1e-10 && wss_err < 1e-8,
        value: err.max(wss_err),
        tolerance: 1e-10,
        detail: format!("velocity {err:.2e} (tol 1e-10), wall stress {wss_err:.2e} (tol 1e-8)"),
    })
}

/// Full tangential traction against the `μ ∂v/∂n` shortcut at 200 wall
/// points of the coarse stenosis flow at Re = 1000.
pub fn traction_identity() -> Result<Check> {
    let geometry = Geometry::Channel(GeometrySpec::stenosis());
    let space = Arc::new(build_space(&geometry, COARSE_H)?);
    let props = FluidProps::blood();
    let theta = reynolds_to_theta(1000.0, geometry.diameter(), &props)?;
    let sol = solve_steady_ns(&space, &props, theta, &SolverOptions::default(), None)?;
    let gamma = build_gamma(&geometry, &ScanRegion::stenosis_default(), 200)?;
    let (mut num, mut den) = (0.0, 0.0);
    for s in &gamma {
        let t = wall_traction(&sol, s)?;
        num += (t.tau[0] - t.tau_shortcut[0]).powi(2) + (t.tau[1] - t.tau_shortcut[1]).powi(2);
        den += t.tau[0].powi(2) + t.tau[1].powi(2);
    }
    let rel = (num / den).sqrt();
    Ok(Check::below("traction_identity", rel, 1e-8, format!("relative difference {rel:.2e}")))
}

/// Adjoint gradient against a central difference on the coarse stenosis.
pub fn adjoint_gradient() -> Result<Check> {
    let geometry = Geometry::Channel(GeometrySpec::stenosis());
    let space = Arc::new(build_space(&geometry, COARSE_H)?);
    let props = FluidProps::blood();
    let theta = reynolds_to_theta(100.0, geometry.diameter(), &props)?;
    let sol = solve_steady_ns(&space, &props, theta, &SolverOptions::default(), None)?;
    let grid = VoxelGrid::new(ScanRegion::stenosis_default(), 3, geometry.diameter(), &geometry)?;
    let psf = Arc::new(PsfOperator::new(&space.mesh, &grid)?);
    let data = VoxelData {
        grid: psf.grid.clone(),
        values: psf.apply(&sol.coeffs),
        kappa: 0.0,
        seed: None,
    };
    let problem = SbiProblem::new(space, props, psf, data, OptimizerSettings::default(), SolverOptions::default())?;
    let t = 0.5 * theta;
    let ga = problem.gradient(&problem.evaluate(t, None)?)?;
    let gf = problem.gradient_fd(t, 1e-4 * t)?;
    let rel = (ga - gf).abs() / gf.abs();
    Ok(Check::below("adjoint_gradient", rel, 1e-6, format!("adjoint {ga:.8e}, difference {gf:.8e}")))
}

/// Sample standard deviation of injected noise over 10⁵ draws.
pub fn noise_std() -> Result<Check> {
    let n = 50_000;
    let grid = VoxelGrid {
        nx: n,
        ny: 1,
        dx: 1.0,
        dy: 1.0,
        region: ScanRegion {
            x_min: 0.0,
            x_max: n as f64,
            y_min: 0.0,
            y_max: 1.0,
        },
        origin: [0.5, 0.5],
        alpha: vec![true; n],
    };
    let clean = VoxelData {
        values: vec![[0.0; 2]; n],
        grid,
        kappa: 0.0,
        seed: None,
    };
    let (kappa, peak) = (0.2, 65.0);
    let noisy = add_noise(&clean, kappa, 7, peak)?;
    let draws: Vec<f64> = noisy.values.iter().flat_map(|v| [v[0], v[1]]).collect();
    let m = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    let rel = (var.sqrt() / (kappa * peak) - 1.0).abs();
    Ok(Check::below("noise_std", rel, 0.01, format!("{} draws, relative std error {rel:.2e}", draws.len())))
}

/// Normalized point-spread weights integrate to one: a constant field is
/// sampled exactly on every masked voxel.
pub fn psf_normalization() -> Result<Check> {
    let geometry = Geometry::Channel(GeometrySpec::stenosis());
    let space = build_space(&geometry, COARSE_H)?;
    let grid = VoxelGrid::new(ScanRegion::stenosis_default(), 9, geometry.diameter(), &geometry)?;
    let psf = PsfOperator::new(&space.mesh, &grid)?;
    let ones = vec![1.0; space.n_dofs()];
    let vals = psf.apply(&ones);
    let err = psf.grid.alpha.iter().zip(&vals).filter(|(a, _)| **a).map(|(_, v)| (v[0] - 1.0).abs()).fold(0.0, f64::max);
    Ok(Check::below("psf_normalization", err, 1e-6, format!("{} voxels, max deviation {err:.2e}", psf.grid.n_masked())))
}

/// The same noisy cell computed twice gives bit-identical errors.
pub fn determinism() -> Result<Check> {
    let cfg = SweepConfig {
        reynolds: vec![100.0],
        kappa: vec![0.1],
        vpd: vec![3],
        sbi_meshes: vec![368],
        truth_mesh: 368,
        master_seed: 11,
        ..SweepConfig::default()
    };
    let cell = Cell {
        re: 100.0,
        kappa: 0.1,
        vpd: 3,
        mesh: 368,
        seed_index: 0,
    };
    let study = Study::prepare(&cfg, std::path::Path::new("."), &[cell])?;
    let a = compute_cell(&study, cell)?.report;
    let b = compute_cell(&study, cell)?.report;
    let same = a.e_sbi.to_bits() == b.e_sbi.to_bits() && a.e_mri.to_bits() == b.e_mri.to_bits();
    Ok(Check {
        name: "determinism",
        passed: same,
        value: (a.e_sbi - b.e_sbi).abs(),
        tolerance: 0.0,
        detail: format!("e_sbi {} / {}, e_mri {} / {}", a.e_sbi, b.e_sbi, a.e_mri, b.e_mri),
    })
}
