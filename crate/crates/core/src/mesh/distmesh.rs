//! Force-equilibrium triangulation of a signed-distance domain
//! (Persson–Strang style): points on a hexagonal lattice are pushed apart by
//! compressed bar springs, re-triangulated by Delaunay whenever they have
//! moved enough, and pulled back onto the boundary when they leave.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{dist, radius_ratio, BoundaryFace, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point};

/// Relative target edge length `h(p) / h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SizeFunction {
    #[default]
    Uniform,
    /// Refines towards `center` (axial position): `h(x) = 1 − (1 − ratio)
    /// exp(−(x − center)² / (2 width²))`.
    Gaussian { center: f64, width: f64, ratio: f64 },
}

impl SizeFunction {
    fn eval(&self, p: Point) -> f64 {
        match *self {
            SizeFunction::Uniform => 1.0,
            SizeFunction::Gaussian { center, width, ratio } => {
                let z = (p[0] - center) / width;
                1.0 - (1.0 - ratio) * (-0.5 * z * z).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistMeshOptions {
    pub size: SizeFunction,
    pub max_iterations: usize,
    /// Required minimum radius ratio.
    pub min_quality: f64,
}

impl Default for DistMeshOptions {
    fn default() -> Self {
        Self {
            size: SizeFunction::Uniform,
            max_iterations: 2000,
            min_quality: 0.5,
        }
    }
}

const F_SCALE: f64 = 1.2;
const DELTA_T: f64 = 0.2;
const TTOL: f64 = 0.1;
const DPTOL: f64 = 1e-3;
/// Radius ratio below which a triangle counts as a sliver.
const SLIVER_QUALITY: f64 = 0.3;
const SLIVER_ROUNDS: usize = 5;

/// Linear (p_geo = 1) mesh of `geometry` with target edge length `h`.
pub fn generate_mesh(geometry: &Geometry, h: f64, opts: &DistMeshOptions) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("mesh size h = {h} must be positive")));
    }
    if let Some(g) = geometry.as_channel() {
        if h >= g.throat_half_width() {
            return Err(Error::InvalidArgument(format!(
                "h = {h} does not resolve the throat (half-width {})",
                g.throat_half_width()
            )));
        }
    }
    let geps = 1e-3 * h;
    let fixed = geometry.fixed_points(h);
    let nfix = fixed.len();

    let mut pts = initial_points(geometry, h, opts, &fixed);
    relax(geometry, &mut pts, nfix, h, opts, opts.max_iterations);
    // boundary slivers: drop the free vertex nearest the boundary and
    // let the rest re-equilibrate
    for _ in 0..SLIVER_ROUNDS {
        let tris = delaunay_inside(geometry, &pts, geps);
        let mut drop: Vec<usize> = tris
            .iter()
            .filter(|t| radius_ratio(pts[t[0]], pts[t[1]], pts[t[2]]) < SLIVER_QUALITY)
            .filter_map(|t| {
                t.iter()
                    .copied()
                    .filter(|&k| k >= nfix)
                    .min_by(|&a, &b| {
                        let da = geometry.signed_distance(pts[a]).abs();
                        da.total_cmp(&geometry.signed_distance(pts[b]).abs())
                    })
            })
            .collect();
        if drop.is_empty() {
            break;
        }
        drop.sort_unstable();
        drop.dedup();
        for &k in drop.iter().rev() {
            pts.remove(k);
        }
        relax(geometry, &mut pts, nfix, h, opts, opts.max_iterations / 4);
    }

    let tris = delaunay_inside(geometry, &pts, geps);
    let mesh = finalize(geometry, pts, tris, &fixed)?;
    let q = mesh.min_quality();
    if q < opts.min_quality {
        return Err(Error::MeshQuality {
            achieved: q,
            required: opts.min_quality,
            iterations: opts.max_iterations,
        });
    }
    Ok(mesh)
}

/// DistMesh force iteration on the free points (indices `nfix..`).
fn relax(geometry: &Geometry, pts: &mut Vec<Point>, nfix: usize, h: f64, opts: &DistMeshOptions, iterations: usize) {
    let geps = 1e-3 * h;
    let mut last = vec![[f64::INFINITY; 2]; pts.len()];
    let mut bars: Vec<(usize, usize)> = Vec::new();

    for _ in 0..iterations {
        let moved = pts
            .iter()
            .zip(&last)
            .map(|(a, b)| dist(*a, *b))
            .fold(0.0, f64::max);
        if moved > TTOL * h {
            last.clone_from(&pts);
            bars = unique_bars(&delaunay_inside(geometry, &pts, geps));
        }

        let mut force = vec![[0.0; 2]; pts.len()];
        let lens: Vec<f64> = bars.iter().map(|&(a, b)| dist(pts[a], pts[b])).collect();
        let hbars: Vec<f64> = bars
            .iter()
            .map(|&(a, b)| opts.size.eval([0.5 * (pts[a][0] + pts[b][0]), 0.5 * (pts[a][1] + pts[b][1])]))
            .collect();
        let sum_l2: f64 = lens.iter().map(|l| l * l).sum();
        let sum_h2: f64 = hbars.iter().map(|h| h * h).sum();
        let scale = F_SCALE * (sum_l2 / sum_h2).sqrt();
        for (k, &(a, b)) in bars.iter().enumerate() {
            let l0 = hbars[k] * scale;
            let f = (l0 - lens[k]).max(0.0);
            if f == 0.0 || lens[k] == 0.0 {
                continue;
            }
            let v = [
                (pts[a][0] - pts[b][0]) / lens[k] * f,
                (pts[a][1] - pts[b][1]) / lens[k] * f,
            ];
            force[a][0] += v[0];
            force[a][1] += v[1];
            force[b][0] -= v[0];
            force[b][1] -= v[1];
        }
        for f in force.iter_mut().take(nfix) {
            *f = [0.0, 0.0];
        }

        let mut max_step: f64 = 0.0;
        for (i, p) in pts.iter_mut().enumerate().skip(nfix) {
            let q = [p[0] + DELTA_T * force[i][0], p[1] + DELTA_T * force[i][1]];
            let q = if geometry.signed_distance(q) > 0.0 {
                geometry.pull_inside(q)
            } else {
                q
            };
            if geometry.signed_distance(q) < -geps {
                max_step = max_step.max(DELTA_T * (force[i][0].hypot(force[i][1])));
            }
            *p = q;
        }
        // the straight ends are already resolved by fixed points; free
        // points that land there are dropped
        let before = pts.len();
        let mut k = 0;
        pts.retain(|p| {
            k += 1;
            k <= nfix || !geometry.on_fixed_section(*p, geps)
        });
        if pts.len() != before {
            last = vec![[f64::INFINITY; 2]; pts.len()];
            continue;
        }
        if max_step < DPTOL * h {
            break;
        }
    }

}

fn initial_points(geometry: &Geometry, h: f64, opts: &DistMeshOptions, fixed: &[Point]) -> Vec<Point> {
    let (lo, hi) = geometry.bounding_box();
    let mut pts: Vec<Point> = fixed.to_vec();
    // deterministic rejection by the size function relative to its minimum
    let hmin = match opts.size {
        SizeFunction::Uniform => 1.0,
        SizeFunction::Gaussian { ratio, .. } => ratio.min(1.0),
    };
    let h0 = h * hmin;
    let dy0 = h0 * 3f64.sqrt() / 2.0;
    let ny = ((hi[1] - lo[1]) / dy0).ceil() as i64 + 1;
    let nx = ((hi[0] - lo[0]) / h0).ceil() as i64 + 2;
    let mut counter = 0u64;
    for j in 0..ny {
        let y = lo[1] + j as f64 * dy0;
        let shift = if j % 2 == 1 { 0.5 * h0 } else { 0.0 };
        for i in 0..nx {
            let x = lo[0] + shift + i as f64 * h0;
            let p = [x, y];
            if geometry.signed_distance(p) >= -1e-3 * h {
                continue;
            }
            if fixed.iter().any(|f| dist(*f, p) < 0.5 * h0) {
                continue;
            }
            if hmin < 1.0 {
                let r = opts.size.eval(p);
                let keep = (hmin / r).powi(2);
                counter = counter.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (counter >> 11) as f64 / (1u64 << 53) as f64;
                if u > keep {
                    continue;
                }
            }
            pts.push(p);
        }
    }
    pts
}

fn delaunay_inside(geometry: &Geometry, pts: &[Point], geps: f64) -> Vec<[usize; 3]> {
    let dp: Vec<delaunator::Point> = pts.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }).collect();
    let tri = delaunator::triangulate(&dp);
    tri.triangles
        .chunks_exact(3)
        .filter_map(|t| {
            let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            if geometry.signed_distance(centroid) >= -geps {
                return None;
            }
            let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if area2 > 0.0 {
                Some([t[0], t[1], t[2]])
            } else {
                Some([t[0], t[2], t[1]])
            }
        })
        .collect()
}

fn unique_bars(tris: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut bars: Vec<(usize, usize)> = tris
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
        .collect();
    bars.sort_unstable();
    bars.dedup();
    bars
}

/// Drops unused points, snaps boundary vertices exactly onto the boundary
/// and tags boundary edges.
fn finalize(geometry: &Geometry, mut pts: Vec<Point>, tris: Vec<[usize; 3]>, fixed: &[Point]) -> Result<Mesh> {
    if tris.is_empty() {
        return Err(Error::Meshing("no triangles inside the domain".into()));
    }
    let mut used = vec![usize::MAX; pts.len()];
    let mut order = Vec::new();
    for t in &tris {
        for &v in t {
            if used[v] == usize::MAX {
                used[v] = order.len();
                order.push(v);
            }
        }
    }
    // keep the original relative order for determinism
    let mut sorted = order.clone();
    sorted.sort_unstable();
    for (new, &old) in sorted.iter().enumerate() {
        used[old] = new;
    }
    let nodes: Vec<Point> = sorted.iter().map(|&i| pts[i]).collect();
    pts.clear();
    let mut connectivity: Vec<usize> = tris.iter().flat_map(|t| t.iter().map(|&v| used[v])).collect();

    let mut mesh = Mesh {
        nodes,
        connectivity: std::mem::take(&mut connectivity),
        boundary_faces: Vec::new(),
        p_geo: 1,
    };

    let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for e in 0..mesh.n_elements() {
        let v = mesh.vertices(e);
        for le in 0..3 {
            let (a, b) = (v[le], v[(le + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push((e, le));
        }
    }
    let mut faces: Vec<BoundaryFace> = Vec::new();
    for (&(a, b), owners) in &edges {
        if owners.len() == 1 {
            let (element, local_edge) = owners[0];
            let tag = geometry.classify_edge(mesh.nodes[a], mesh.nodes[b]);
            faces.push(BoundaryFace {
                element,
                local_edge,
                tag,
            });
        } else if owners.len() > 2 {
            return Err(Error::Meshing(format!("non-manifold edge ({a}, {b})")));
        }
    }
    faces.sort_unstable_by_key(|f| (f.element, f.local_edge));

    // snap boundary vertices; fixed points (corners among them) already lie
    // on the boundary
    let mut snapped = vec![false; mesh.n_nodes()];
    for f in &faces {
        let v = mesh.vertices(f.element);
        for k in [f.local_edge, (f.local_edge + 1) % 3] {
            let i = v[k];
            if snapped[i] {
                continue;
            }
            snapped[i] = true;
            let p = mesh.nodes[i];
            if fixed.iter().any(|c| dist(*c, p) < 1e-12) {
                continue;
            }
            mesh.nodes[i] = geometry.snap(p, f.tag)?;
        }
    }
    for f in &faces {
        let v = mesh.vertices(f.element);
        let (a, b) = (mesh.nodes[v[f.local_edge]], mesh.nodes[v[(f.local_edge + 1) % 3]]);
        let drift = geometry.signed_distance(a).abs().max(geometry.signed_distance(b).abs());
        if drift > 1e-6 {
            return Err(Error::Meshing(format!(
                "boundary edge of element {} has a vertex off the boundary by {drift:e}",
                f.element
            )));
        }
    }
    mesh.boundary_faces = faces;
    for e in 0..mesh.n_elements() {
        let [a, b, c] = mesh.vertices(e).map(|i| mesh.nodes[i]);
        if radius_ratio(a, b, c) <= 0.0 {
            return Err(Error::Meshing(format!("degenerate element {e}")));
        }
    }
    mesh.check_jacobians()?;
    Ok(mesh)
}
