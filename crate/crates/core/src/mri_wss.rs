//! Wall shear stress estimated directly from voxel data.
//!
//! The voxel values are interpolated bilinearly between centroids, a
//! quadratic through the wall (where the velocity is taken as zero) and two
//! probe points along the inward normal gives the wall-normal derivative,
//! and the tangential part of that derivative scaled by μ is the stress.

use crate::error::{Error, Result};
use crate::fem::FluidProps;
use crate::geometry::Point;
use crate::mri::VoxelData;
use crate::profile::{Method, WallSample, WssProfile};

/// Probe increment `δ = 1.2 · min(Δx, Δy, 0.06)` (cm).
pub fn probe_increment(dx: f64, dy: f64) -> f64 {
    1.2 * dx.min(dy).min(0.06)
}

/// Bilinear interpolation of the voxel values at `p`.
///
/// Points outside the hull of the centroids are clamped onto it. Masked-out
/// corners are dropped and the remaining weights renormalized.
pub fn bilinear_reconstruct(data: &VoxelData, p: Point) -> Result<[f64; 2]> {
    let g = &data.grid;
    let axis = |v: f64, o: f64, d: f64, n: usize| -> (usize, f64) {
        if n == 1 {
            return (0, 0.0);
        }
        let f = ((v - o) / d).clamp(0.0, (n - 1) as f64);
        let i = (f.floor() as usize).min(n - 2);
        (i, f - i as f64)
    };
    let (ix, tx) = axis(p[0], g.origin[0], g.dx, g.nx);
    let (iy, ty) = axis(p[1], g.origin[1], g.dy, g.ny);
    let mut sum = [0.0; 2];
    let mut wsum = 0.0;
    for (cx, wx) in [(0, 1.0 - tx), (1, tx)] {
        for (cy, wy) in [(0, 1.0 - ty), (1, ty)] {
            let (jx, jy) = (ix + cx, iy + cy);
            if jx >= g.nx || jy >= g.ny {
                continue;
            }
            let i = g.index(jx, jy);
            if !g.alpha[i] {
                continue;
            }
            let w = wx * wy;
            sum[0] += w * data.values[i][0];
            sum[1] += w * data.values[i][1];
            wsum += w;
        }
    }
    if wsum <= 0.0 {
        // the only unmasked corners carry zero weight: fall back to the
        // unweighted mean of whatever valid corners exist
        let mut n = 0.0;
        for (cx, cy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let (jx, jy) = (ix + cx, iy + cy);
            if jx < g.nx && jy < g.ny && g.alpha[g.index(jx, jy)] {
                let v = data.values[g.index(jx, jy)];
                sum[0] += v[0];
                sum[1] += v[1];
                n += 1.0;
            }
        }
        if n == 0.0 {
            return Err(Error::Reconstruction { x: p[0], y: p[1] });
        }
        return Ok([sum[0] / n, sum[1] / n]);
    }
    Ok([sum[0] / wsum, sum[1] / wsum])
}

/// Derivative at the wall of the quadratic through `(0, 0)`,
/// `(δ, v(x − δn))` and `(2δ, v(x − 2δn))`.
pub fn normal_velocity_derivative(data: &VoxelData, x: Point, n: Point, delta: f64) -> Result<[f64; 2]> {
    let probe = |k: usize| -> Result<[f64; 2]> {
        let s = k as f64 * delta;
        let p = [x[0] - s * n[0], x[1] - s * n[1]];
        bilinear_reconstruct(data, p).map_err(|_| Error::Probe { probe: k, x: p[0], y: p[1] })
    };
    let v1 = probe(1)?;
    let v2 = probe(2)?;
    Ok([
        2.0 / delta * v1[0] - 0.5 / delta * v2[0],
        2.0 / delta * v1[1] - 0.5 / delta * v2[1],
    ])
}

/// `σ_N = μ ‖(I − nnᵀ) ṽ'(0)‖` at each exact wall sample, in Pa.
pub fn mri_wss_profile(data: &VoxelData, samples: &[WallSample], props: &FluidProps) -> Result<WssProfile> {
    let delta = probe_increment(data.grid.dx, data.grid.dy);
    let mu = props.mu_dyn();
    let wss = samples
        .iter()
        .map(|s| {
            let d = normal_velocity_derivative(data, s.point, s.normal, delta)?;
            Ok(mu * tangential_norm(d, s.normal))
        })
        .collect::<Result<Vec<_>>>()?;
    WssProfile::new(Method::Mri, samples.to_vec(), wss)
}

fn tangential_norm(v: [f64; 2], n: Point) -> f64 {
    let vn = v[0] * n[0] + v[1] * n[1];
    (v[0] - vn * n[0]).hypot(v[1] - vn * n[1])
}
