use std::collections::HashMap;
use std::f64::consts::PI;

use super::VoxelGrid;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::{det, Mesh};
use crate::quadrature::{subdivided_triangle_rule, TriPoint};

/// Gauss points per direction on each sub-triangle.
const RULE_POINTS: usize = 6;
/// Largest sub-triangle edge relative to the voxel spacing.
const SUB_SIZE: f64 = 0.5;
/// Normalizations below this fraction of the voxel area drop the voxel.
const MIN_NORMALIZATION: f64 = 1e-6;
/// Logistic widths past the box edge where the support is cut.
const TAIL_WIDTHS: f64 = 20.0;

/// `sin(πz)/(πz)` with `sinc(0) = 1`.
pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - (PI * z).powi(2) / 6.0
    } else {
        (PI * z).sin() / (PI * z)
    }
}

fn logistic(z: f64) -> f64 {
    let z = z.clamp(-700.0, 700.0);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Smoothed indicator of `[s0 − ω/2, s0 + ω/2]` with edge width `γ`.
pub fn smoothed_box(s: f64, s0: f64, omega: f64, gamma: f64) -> f64 {
    logistic((s - (s0 - 0.5 * omega)) / gamma) - logistic((s - (s0 + 0.5 * omega)) / gamma)
}

/// One-dimensional factor `sinc((s − c)/Δs) · χ(s; c, 4Δs, γ)`.
fn psi(s: f64, c: f64, ds: f64, gamma: f64) -> f64 {
    sinc((s - c) / ds) * smoothed_box(s, c, 4.0 * ds, gamma)
}

fn gamma(grid: &VoxelGrid) -> f64 {
    0.1 * grid.dx.min(grid.dy)
}

/// Unnormalized point-spread weight `w̄_i(p)` of voxel `i`.
pub fn psf_weight(p: Point, i: usize, grid: &VoxelGrid) -> f64 {
    let c = grid.centroid(i);
    let g = gamma(grid);
    psi(p[0], c[0], grid.dx, g) * psi(p[1], c[1], grid.dy, g)
}

/// Linear map from P3 nodal velocities to voxel values,
/// `Ξ_i(u) = ∫_Ω w_i u dv`, integrated on the mesh.
#[derive(Debug, Clone)]
pub struct PsfOperator {
    /// Grid with voxels of degenerate normalization removed from the mask.
    pub grid: VoxelGrid,
    /// `∫_Ω w̄_i dv` per voxel (0 where unmasked).
    pub norms: Vec<f64>,
    n_nodes: usize,
    /// Normalized nodal weights per voxel.
    rows: Vec<Vec<(usize, f64)>>,
}

impl PsfOperator {
    pub fn new(mesh: &Mesh, grid: &VoxelGrid) -> Result<Self> {
        let n = grid.len();
        let mut norms = vec![0.0; n];
        let mut acc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        integrate(mesh, grid, |i, el, pts, w| {
            let mut local = [0.0; 28];
            let mut total = 0.0;
            for (pt, &wq) in pts.iter().zip(w) {
                total += wq;
                for (a, &v) in pt.phi.iter().enumerate() {
                    local[a] += wq * v;
                }
            }
            norms[i] += total;
            acc[i].extend(el.iter().zip(local.iter()).map(|(&k, &v)| (k, v)));
        });
        let mut grid = grid.clone();
        let min_norm = MIN_NORMALIZATION * grid.dx * grid.dy;
        let mut rows = Vec::with_capacity(n);
        for (i, mut row) in acc.into_iter().enumerate() {
            let s = norms[i];
            if !s.is_finite() {
                return Err(Error::Normalization { voxel: i, integral: s });
            }
            if !grid.alpha[i] || s <= min_norm {
                grid.alpha[i] = false;
                norms[i] = 0.0;
                rows.push(Vec::new());
                continue;
            }
            row.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len() / 3);
            for (k, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == k => last.1 += v,
                    _ => merged.push((k, v)),
                }
            }
            for e in &mut merged {
                e.1 /= s;
            }
            rows.push(merged);
        }
        Ok(Self {
            grid,
            norms,
            n_nodes: mesh.n_nodes(),
            rows,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Voxel values of a blocked nodal field `[u1, u2, ...]`; unmasked
    /// voxels read zero.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<[f64; 2]> {
        let nn = self.n_nodes;
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .fold([0.0; 2], |s, &(k, w)| [s[0] + w * coeffs[k], s[1] + w * coeffs[nn + k]])
            })
            .collect()
    }

    /// Adds `Wᵀ r` into the velocity block of `out`.
    pub fn apply_transpose(&self, r: &[[f64; 2]], out: &mut [f64]) {
        let nn = self.n_nodes;
        for (row, ri) in self.rows.iter().zip(r) {
            for &(k, w) in row {
                out[k] += w * ri[0];
                out[nn + k] += w * ri[1];
            }
        }
    }

    /// Normalized weight `w_i(p)`.
    pub fn weight(&self, p: Point, i: usize) -> f64 {
        if self.norms[i] > 0.0 {
            psf_weight(p, i, &self.grid) / self.norms[i]
        } else {
            0.0
        }
    }

    /// `Ξ_i(f)` for an arbitrary field, on the same quadrature as the
    /// operator.
    pub fn sample_field(&self, mesh: &Mesh, f: impl Fn(Point) -> [f64; 2]) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.grid.len()];
        integrate(mesh, &self.grid, |i, _, pts, w| {
            if self.norms[i] == 0.0 {
                return;
            }
            for (pt, &wq) in pts.iter().zip(w) {
                let v = f(pt.x);
                out[i][0] += wq * v[0];
                out[i][1] += wq * v[1];
            }
        });
        for (o, &s) in out.iter_mut().zip(&self.norms) {
            if s > 0.0 {
                o[0] /= s;
                o[1] /= s;
            }
        }
        out
    }
}

struct QuadPoint {
    x: Point,
    wdet: f64,
    phi: Vec<f64>,
}

/// Visits every (masked voxel, element) pair whose supports overlap with the
/// element's quadrature points and their weights `|J| w_q · w̄_i(x_q)`.
fn integrate(mesh: &Mesh, grid: &VoxelGrid, mut visit: impl FnMut(usize, &[usize], &[QuadPoint], &[f64])) {
    let basis = mesh.basis();
    let npe = basis.len();
    let g = gamma(grid);
    let rx = 2.0 * grid.dx + TAIL_WIDTHS * g;
    let ry = 2.0 * grid.dy + TAIL_WIDTHS * g;
    let h_sub = SUB_SIZE * grid.dx.min(grid.dy);
    let mut rules: HashMap<usize, Vec<TriPoint>> = HashMap::new();
    let mut pts: Vec<QuadPoint> = Vec::new();
    let mut wx: Vec<f64> = Vec::new();
    let mut wy: Vec<f64> = Vec::new();
    let mut w: Vec<f64> = Vec::new();
    let mut grad = vec![[0.0; 2]; npe];

    for e in 0..mesh.n_elements() {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in mesh.element_nodes(e) {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let size = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let pad = 0.05 * size;
        let range = |l: f64, h: f64, o: f64, d: f64, r: f64, n: usize| -> Option<(usize, usize)> {
            let a = ((l - pad - r - o) / d).ceil().max(0.0);
            let b = ((h + pad + r - o) / d).floor();
            if b < 0.0 || a > b || a as usize >= n {
                return None;
            }
            Some((a as usize, (b as usize).min(n - 1)))
        };
        let Some((ix0, ix1)) = range(lo[0], hi[0], grid.origin[0], grid.dx, rx, grid.nx) else {
            continue;
        };
        let Some((iy0, iy1)) = range(lo[1], hi[1], grid.origin[1], grid.dy, ry, grid.ny) else {
            continue;
        };
        if !(iy0..=iy1).any(|iy| (ix0..=ix1).any(|ix| grid.alpha[grid.index(ix, iy)])) {
            continue;
        }

        let m = ((size / h_sub).ceil() as usize).max(1);
        let rule = rules.entry(m).or_insert_with(|| subdivided_triangle_rule(RULE_POINTS, m));
        pts.clear();
        for q in rule.iter() {
            let mut phi = vec![0.0; npe];
            basis.eval_with_grad(q.xi, q.eta, &mut phi, &mut grad);
            let mut x = [0.0; 2];
            let mut j = [[0.0; 2]; 2];
            for (a, p) in mesh.element_nodes(e).enumerate() {
                for d in 0..2 {
                    x[d] += phi[a] * p[d];
                    j[0][d] += grad[a][0] * p[d];
                    j[1][d] += grad[a][1] * p[d];
                }
            }
            pts.push(QuadPoint {
                x,
                wdet: q.weight * det(j),
                phi,
            });
        }
        let nq = pts.len();
        let ncol = ix1 - ix0 + 1;
        let nrow = iy1 - iy0 + 1;
        wx.clear();
        wy.clear();
        for ix in ix0..=ix1 {
            let c = grid.origin[0] + ix as f64 * grid.dx;
            wx.extend(pts.iter().map(|p| if (p.x[0] - c).abs() <= rx { psi(p.x[0], c, grid.dx, g) } else { 0.0 }));
        }
        for iy in iy0..=iy1 {
            let c = grid.origin[1] + iy as f64 * grid.dy;
            wy.extend(pts.iter().map(|p| if (p.x[1] - c).abs() <= ry { psi(p.x[1], c, grid.dy, g) } else { 0.0 }));
        }
        let el = mesh.element(e);
        for r in 0..nrow {
            for c in 0..ncol {
                let i = grid.index(ix0 + c, iy0 + r);
                if !grid.alpha[i] {
                    continue;
                }
                let (fx, fy) = (&wx[c * nq..(c + 1) * nq], &wy[r * nq..(r + 1) * nq]);
                w.clear();
                w.extend((0..nq).map(|q| pts[q].wdet * fx[q] * fy[q]));
                if w.iter().all(|&v| v == 0.0) {
                    continue;
                }
                visit(i, el, &pts, &w);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_box_values() {
        let v = smoothed_box(0.3, 0.3, 1.0, 0.01);
        let expect = 1.0 / (1.0 + (-50f64).exp()) - 1.0 / (1.0 + 50f64.exp());
        assert!((v - expect).abs() < 1e-15 && (v - 1.0).abs() < 1e-15);
        for a in [0.1, 0.37, 0.5, 2.0] {
            assert!((smoothed_box(1.0 + a, 1.0, 1.0, 0.05) - smoothed_box(1.0 - a, 1.0, 1.0, 0.05)).abs() < 1e-15);
        }
        assert!(smoothed_box(1e6, 0.0, 1.0, 1e-6).abs() < 1e-300);
        assert!((smoothed_box(0.2, 0.0, 1.0, 1e-4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sinc_zeros_and_centre() {
        assert_eq!(sinc(0.0), 1.0);
        for k in 1..5 {
            assert!(sinc(k as f64).abs() < 1e-15);
        }
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
    }
}
