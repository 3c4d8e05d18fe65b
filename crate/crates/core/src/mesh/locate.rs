use super::{det, Mesh};
use crate::geometry::Point;
use crate::lagrange::LagrangeTriangle;

/// Element and reference coordinates of a located point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    pub element: usize,
    pub xi: f64,
    pub eta: f64,
}

/// Uniform bucket grid over element bounding boxes with an inverse
/// isoparametric map per candidate.
#[derive(Debug, Clone)]
pub struct PointLocator {
    basis: LagrangeTriangle,
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

const REF_TOL: f64 = 1e-10;

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let ne = mesh.n_elements();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut boxes = Vec::with_capacity(ne);
        let mut size = 0.0;
        for e in 0..ne {
            let mut bl = [f64::INFINITY; 2];
            let mut bh = [f64::NEG_INFINITY; 2];
            for p in mesh.element_nodes(e) {
                for d in 0..2 {
                    bl[d] = bl[d].min(p[d]);
                    bh[d] = bh[d].max(p[d]);
                }
            }
            // curved sides can bulge past their nodes
            let pad = 0.05 * (bh[0] - bl[0]).max(bh[1] - bl[1]);
            for d in 0..2 {
                bl[d] -= pad;
                bh[d] += pad;
                lo[d] = lo[d].min(bl[d]);
                hi[d] = hi[d].max(bh[d]);
            }
            size += (bh[0] - bl[0]).max(bh[1] - bl[1]);
            boxes.push((bl, bh));
        }
        let cell = if ne > 0 { size / ne as f64 } else { 1.0 };
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let idx = |v: f64, o: f64, n: usize| (((v - o) / cell).floor().max(0.0) as usize).min(n - 1);
        for (e, (bl, bh)) in boxes.iter().enumerate() {
            for iy in idx(bl[1], lo[1], ny)..=idx(bh[1], lo[1], ny) {
                for ix in idx(bl[0], lo[0], nx)..=idx(bh[0], lo[0], nx) {
                    buckets[iy * nx + ix].push(e);
                }
            }
        }
        Self {
            basis: mesh.basis(),
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn bucket(&self, p: Point) -> Option<&[usize]> {
        let fx = (p[0] - self.origin[0]) / self.cell;
        let fy = (p[1] - self.origin[1]) / self.cell;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        Some(&self.buckets[iy * self.nx + ix])
    }

    /// Element containing `p`, or `None` outside the mesh.
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<Located> {
        self.locate_with_tolerance(mesh, p, REF_TOL)
    }

    /// As [`locate`](Self::locate) but accepting reference coordinates up to
    /// `tol` outside the reference triangle; the result is clamped back in.
    pub fn locate_with_tolerance(&self, mesh: &Mesh, p: Point, tol: f64) -> Option<Located> {
        let mut best: Option<(f64, Located)> = None;
        for &e in self.bucket(p)? {
            let Some([xi, eta]) = self.inverse_map(mesh, e, p) else {
                continue;
            };
            let outside = (-xi).max(-eta).max(xi + eta - 1.0);
            if outside <= REF_TOL {
                return Some(Located { element: e, xi, eta });
            }
            if outside <= tol && best.is_none_or(|(o, _)| outside < o) {
                best = Some((outside, clamp(e, xi, eta)));
            }
        }
        best.map(|(_, l)| l)
    }

    /// Reference coordinates of `p` under element `e`'s map (Newton).
    pub fn inverse_map(&self, mesh: &Mesh, e: usize, p: Point) -> Option<[f64; 2]> {
        let (mut xi, mut eta) = (1.0 / 3.0, 1.0 / 3.0);
        for _ in 0..30 {
            let (x, j) = mesh.map(&self.basis, e, xi, eta);
            let r = [p[0] - x[0], p[1] - x[1]];
            let d = det(j);
            if d.abs() < 1e-300 {
                return None;
            }
            let dxi = (j[1][1] * r[0] - j[1][0] * r[1]) / d;
            let deta = (-j[0][1] * r[0] + j[0][0] * r[1]) / d;
            xi += dxi;
            eta += deta;
            if !(xi.abs() < 10.0 && eta.abs() < 10.0) {
                return None;
            }
            if dxi.abs() + deta.abs() < 1e-14 {
                return Some([xi, eta]);
            }
        }
        let (x, _) = mesh.map(&self.basis, e, xi, eta);
        let err = (p[0] - x[0]).hypot(p[1] - x[1]);
        (err < 1e-12).then_some([xi, eta])
    }
}

fn clamp(e: usize, xi: f64, eta: f64) -> Located {
    let (mut xi, mut eta) = (xi.max(0.0), eta.max(0.0));
    let s = xi + eta;
    if s > 1.0 {
        xi /= s;
        eta /= s;
    }
    Located { element: e, xi, eta }
}
