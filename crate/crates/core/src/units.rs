//! Unit conversions.
//!
//! Lengths are carried in centimetres and velocities in cm/s throughout the
//! solver. Material properties are stored in SI and converted here, once.
//! Wall shear stress is reported in pascals.

/// Metres per centimetre.
pub const M_PER_CM: f64 = 1.0e-2;

/// Square centimetres per square metre.
pub const CM2_PER_M2: f64 = 1.0e4;

/// Kinematic viscosity, m²/s → cm²/s.
#[inline]
pub fn kinematic_viscosity_cgs(nu_si: f64) -> f64 {
    nu_si * CM2_PER_M2
}

/// Speed, m/s → cm/s.
#[inline]
pub fn speed_cm_per_s(v_si: f64) -> f64 {
    v_si / M_PER_CM
}

/// Length, cm → m.
#[inline]
pub fn length_m(l_cm: f64) -> f64 {
    l_cm * M_PER_CM
}

/// Shear stress from a dynamic viscosity in Pa·s and a velocity gradient in
/// 1/s. The gradient of a cm/s field over cm is already in 1/s, so the
/// product is in Pa without further scaling.
#[inline]
pub fn shear_stress_pa(mu_dyn: f64, gradient_per_s: f64) -> f64 {
    mu_dyn * gradient_per_s
}
