//! Relative L2 errors of WSS profiles along the comparison curve Γ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point, WallSide};
use crate::mri::ScanRegion;
use crate::profile::{WallSample, WssProfile};
use crate::quadrature::GaussLegendre;

/// Samples along Γ used by every method.
pub const DEFAULT_SAMPLES: usize = 200;
/// Gauss–Legendre points per inter-sample panel.
pub const DEFAULT_QUAD_ORDER: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Percent.
    pub e_sbi: f64,
    /// Percent.
    pub e_mri: f64,
    pub abs_sbi: Vec<f64>,
    pub abs_mri: Vec<f64>,
    pub s_range: [f64; 2],
    pub x_range: [f64; 2],
    pub quad_order: usize,
}

impl ErrorReport {
    pub fn new(truth: &WssProfile, mri: &WssProfile, sbi: &WssProfile, quad_order: usize) -> Result<Self> {
        let diff = |p: &WssProfile| truth.wss.iter().zip(&p.wss).map(|(a, b)| (a - b).abs()).collect();
        let s = truth.arc_lengths();
        let first = truth.samples.first().ok_or(Error::ProfileMismatch)?;
        let last = truth.samples.last().ok_or(Error::ProfileMismatch)?;
        Ok(Self {
            e_sbi: relative_l2_error(truth, sbi, quad_order)?,
            e_mri: relative_l2_error(truth, mri, quad_order)?,
            abs_sbi: diff(sbi),
            abs_mri: diff(mri),
            s_range: [s[0], s[s.len() - 1]],
            x_range: [first.point[0], last.point[0]],
            quad_order,
        })
    }
}

/// Four-point Lagrange interpolant of `v(s)` on panel `k` (between samples
/// `k` and `k + 1`), using the nearest centred stencil.
fn panel_interp(s: &[f64], v: &[f64], k: usize, t: f64) -> f64 {
    let n = s.len();
    if n < 4 {
        // too few points for a cubic: linear
        let w = (t - s[k]) / (s[k + 1] - s[k]);
        return (1.0 - w) * v[k] + w * v[k + 1];
    }
    let lo = k.saturating_sub(1).min(n - 4);
    let idx = lo..lo + 4;
    let mut out = 0.0;
    for i in idx.clone() {
        let mut l = 1.0;
        for j in idx.clone() {
            if j != i {
                l *= (t - s[j]) / (s[i] - s[j]);
            }
        }
        out += l * v[i];
    }
    out
}

/// `‖σ_ref − σ_test‖_{L2(Γ)} / ‖σ_ref‖_{L2(Γ)}` in percent, integrated with
/// `quad_order`-point Gauss–Legendre on every panel between samples and
/// piecewise-cubic interpolation of the profiles.
pub fn relative_l2_error(reference: &WssProfile, test: &WssProfile, quad_order: usize) -> Result<f64> {
    if reference.len() != test.len() || reference.len() < 2 {
        return Err(Error::ProfileMismatch);
    }
    let s = reference.arc_lengths();
    let scale = s[s.len() - 1] - s[0];
    if s
        .iter()
        .zip(&test.samples)
        .any(|(a, b)| (a - b.s).abs() > 1e-9 * scale.max(1.0))
    {
        return Err(Error::ProfileMismatch);
    }
    let gl = GaussLegendre::new(quad_order.max(1));
    let diff: Vec<f64> = reference.wss.iter().zip(&test.wss).map(|(a, b)| a - b).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..s.len() - 1 {
        for (t, w) in gl.on_interval(s[k], s[k + 1]) {
            num += w * panel_interp(&s, &diff, k, t).powi(2);
            den += w * panel_interp(&s, &reference.wss, k, t).powi(2);
        }
    }
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric);
    }
    Ok(100.0 * (num / den).sqrt())
}

/// `n` arc-length-uniform samples on the top wall, restricted to the axial
/// extent of the scan region.
pub fn build_gamma(geometry: &Geometry, region: &ScanRegion, n: usize) -> Result<Vec<WallSample>> {
    if n < 2 {
        return Err(Error::Config("Γ needs at least two samples".into()));
    }
    match geometry {
        Geometry::Channel(g) => {
            let a = region.x_min.max(g.x_min);
            let b = region.x_max.min(g.x_max);
            if !(b > a) {
                return Err(Error::Config(format!(
                    "scan region x ∈ [{}, {}] misses the channel",
                    region.x_min, region.x_max
                )));
            }
            let total = g.wall_arc_length(a, b);
            (0..n)
                .map(|k| {
                    let s = total * k as f64 / (n - 1) as f64;
                    let x = match k {
                        0 => a,
                        _ if k == n - 1 => b,
                        _ => g.axial_at_arc_length(a, s),
                    };
                    Ok(WallSample {
                        s,
                        point: g.wall_point(x, WallSide::Top),
                        normal: g.wall_normal(x, WallSide::Top)?,
                    })
                })
                .collect()
        }
        Geometry::Polyline(g) => {
            // the wall chain with the highest mean height plays the top wall
            let chains = g.wall_chains();
            let mean_y = |c: &Vec<usize>| c.iter().map(|&k| g.vertices[k][1]).sum::<f64>() / c.len() as f64;
            let chain = chains
                .iter()
                .max_by(|a, b| mean_y(a).total_cmp(&mean_y(b)))
                .ok_or_else(|| Error::Config("geometry has no wall".into()))?;
            // clip each segment to the axial range
            let mut pieces: Vec<(Point, Point, Point)> = Vec::new();
            for &k in chain {
                let (p, q) = g.segment(k);
                let (lo, hi) = (p[0].min(q[0]), p[0].max(q[0]));
                let (a, b) = (lo.max(region.x_min), hi.min(region.x_max));
                if b < a || (b == a && lo != hi) {
                    continue;
                }
                let at = |x: f64| {
                    if hi == lo {
                        None
                    } else {
                        let t = (x - p[0]) / (q[0] - p[0]);
                        Some([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])])
                    }
                };
                let (pa, pb) = match (at(a), at(b)) {
                    (Some(u), Some(v)) if p[0] <= q[0] => (u, v),
                    (Some(u), Some(v)) => (v, u),
                    _ => (p, q),
                };
                if pa != pb {
                    pieces.push((pa, pb, g.segment_normal(k)));
                }
            }
            if pieces.is_empty() {
                return Err(Error::Config("scan region misses the top wall".into()));
            }
            // run left to right like the channel
            if pieces[0].0[0] > pieces[pieces.len() - 1].1[0] {
                pieces.reverse();
                for p in &mut pieces {
                    std::mem::swap(&mut p.0, &mut p.1);
                }
            }
            let lens: Vec<f64> = pieces.iter().map(|(a, b, _)| (b[0] - a[0]).hypot(b[1] - a[1])).collect();
            let total: f64 = lens.iter().sum();
            let mut out = Vec::with_capacity(n);
            let (mut piece, mut start) = (0, 0.0);
            for k in 0..n {
                let s = total * k as f64 / (n - 1) as f64;
                while piece + 1 < pieces.len() && s > start + lens[piece] {
                    start += lens[piece];
                    piece += 1;
                }
                let (a, b, normal) = pieces[piece];
                let t = ((s - start) / lens[piece]).clamp(0.0, 1.0);
                out.push(WallSample {
                    s,
                    point: [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                    normal,
                });
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometrySpec;
    use crate::profile::Method;

    fn profile(f: impl Fn(f64) -> f64, n: usize) -> WssProfile {
        let samples: Vec<WallSample> = (0..n)
            .map(|k| WallSample {
                s: k as f64 / (n - 1) as f64 * 3.0,
                point: [k as f64, 0.3],
                normal: [0.0, 1.0],
            })
            .collect();
        let wss = samples.iter().map(|s| f(s.s)).collect();
        WssProfile::new(Method::Truth, samples, wss).unwrap()
    }

    #[test]
    fn trivial_errors() {
        let r = profile(|s| 1.0 + s.sin(), 50);
        let zero = profile(|_| 0.0, 50);
        let twice = profile(|s| 2.0 * (1.0 + s.sin()), 50);
        assert_eq!(relative_l2_error(&r, &r, 5).unwrap(), 0.0);
        assert!((relative_l2_error(&r, &zero, 5).unwrap() - 100.0).abs() < 1e-12);
        assert!((relative_l2_error(&r, &twice, 5).unwrap() - 100.0).abs() < 1e-12);
        assert!(matches!(relative_l2_error(&zero, &r, 5), Err(Error::UndefinedMetric)));
    }

    #[test]
    fn cubic_profiles_integrate_exactly() {
        // difference s, reference 1 + s on [0, 3]
        let r = profile(|s| 1.0 + s, 7);
        let t = profile(|_| 1.0, 7);
        let num: f64 = 9.0;
        let den: f64 = 21.0;
        let e = relative_l2_error(&r, &t, 5).unwrap();
        assert!((e - 100.0 * (num / den).sqrt()).abs() < 1e-12, "{e}");
    }

    #[test]
    fn gamma_endpoints_and_length() {
        let g = Geometry::Channel(GeometrySpec::stenosis());
        let region = ScanRegion::stenosis_default();
        let gam = build_gamma(&g, &region, 200).unwrap();
        assert_eq!(gam.len(), 200);
        assert!((gam[0].point[0] - 1.5).abs() < 1e-14);
        assert!((gam[199].point[0] - 4.5).abs() < 1e-14);
        let spec = GeometrySpec::stenosis();
        for w in &gam {
            assert!((w.point[1] - spec.y(w.point[0])).abs() < 1e-14);
        }
        let ds: Vec<f64> = gam.windows(2).map(|w| w[1].s - w[0].s).collect();
        assert!(ds.iter().all(|d| (d - ds[0]).abs() < 1e-12));
    }

    #[test]
    fn gamma_rejects_empty_intersection() {
        let g = Geometry::Channel(GeometrySpec::stenosis());
        let region = ScanRegion {
            x_min: 7.0,
            x_max: 8.0,
            y_min: -1.0,
            y_max: 1.0,
        };
        assert!(matches!(build_gamma(&g, &region, 200), Err(Error::Config(_))));
    }
}
