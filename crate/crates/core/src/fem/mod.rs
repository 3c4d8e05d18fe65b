//! Steady incompressible Navier–Stokes on curved P3/P2 Taylor–Hood elements.
//!
//! Velocities are in cm/s, lengths in cm, and the pressure unknown is the
//! kinematic pressure `P/ρ` in cm²/s². The momentum equation is assembled in
//! the Laplacian form `(v·∇)v − ν∆v + ∇p = 0`, whose natural condition on the
//! outflow is the do-nothing traction `ν ∂v/∂n − p n = 0`.

mod eval;
mod solver;
mod space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

pub use eval::{compute_wss, wall_traction, WallTraction};
pub use solver::{continuation_schedule, solve_steady_ns, FlowSolution, NewtonReport, SolverOptions};
pub use space::FlowSpace;

/// Fluid material constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidProps {
    /// Density, kg/m³.
    pub rho0: f64,
    /// Kinematic viscosity, m²/s.
    pub nu: f64,
}

impl Default for FluidProps {
    fn default() -> Self {
        Self::blood()
    }
}

impl FluidProps {
    pub fn new(rho0: f64, nu: f64) -> Result<Self> {
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(Error::InvalidArgument(format!("density must be positive, got {rho0}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self { rho0, nu })
    }

    /// ρ0 = 1060 kg/m³, ν = 2.83e-6 m²/s.
    pub fn blood() -> Self {
        Self {
            rho0: 1060.0,
            nu: 2.83e-6,
        }
    }

    /// Dynamic viscosity in Pa·s.
    pub fn mu_dyn(&self) -> f64 {
        self.rho0 * self.nu
    }

    /// Kinematic viscosity in cm²/s.
    pub fn nu_cgs(&self) -> f64 {
        units::kinematic_viscosity_cgs(self.nu)
    }

    /// Converts a kinematic pressure in cm²/s² to Pa.
    pub fn pressure_pa(&self, p_kinematic: f64) -> f64 {
        self.rho0 * p_kinematic / units::CM2_PER_M2
    }
}

/// Parabolic inflow `((B0 − x2)(B0 + x2)/B0² · θ, 0)`.
pub fn inflow_profile(x2: f64, theta: f64, b0: f64) -> [f64; 2] {
    [(b0 - x2) * (b0 + x2) / (b0 * b0) * theta, 0.0]
}

/// Peak inflow speed (cm/s) for a Reynolds number based on the diameter
/// `diameter_cm`.
pub fn reynolds_to_theta(re: f64, diameter_cm: f64, props: &FluidProps) -> Result<f64> {
    if !(re > 0.0 && re.is_finite()) {
        return Err(Error::InvalidArgument(format!("Reynolds number must be positive, got {re}")));
    }
    if !(diameter_cm > 0.0) {
        return Err(Error::InvalidArgument(format!("diameter must be positive, got {diameter_cm}")));
    }
    let v_si = re * props.nu / units::length_m(diameter_cm);
    Ok(units::speed_cm_per_s(v_si))
}

pub fn theta_to_reynolds(theta: f64, diameter_cm: f64, props: &FluidProps) -> f64 {
    theta * diameter_cm / props.nu_cgs()
}
