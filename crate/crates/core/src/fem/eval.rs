use super::space::{physical_gradients, NP, NV};
use super::FlowSolution;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Point};
use crate::lagrange::LagrangeTriangle;
use crate::mesh::{det, Located};
use crate::profile::{Method, WallSample, WssProfile};

/// Reference-coordinate slack accepted when locating points on the curved
/// boundary.
const LOCATE_TOL: f64 = 1e-8;

impl FlowSolution {
    pub fn locate(&self, p: Point) -> Result<Located> {
        self.space
            .locator
            .locate_with_tolerance(&self.space.mesh, p, LOCATE_TOL)
            .ok_or(Error::PointLocation { x: p[0], y: p[1] })
    }

    pub fn evaluate_velocity(&self, p: Point) -> Result<[f64; 2]> {
        Ok(self.velocity_at(self.locate(p)?))
    }

    /// `G[i][j] = ∂v_i/∂x_j` in 1/s.
    pub fn evaluate_velocity_gradient(&self, p: Point) -> Result<[[f64; 2]; 2]> {
        Ok(self.gradient_at(self.locate(p)?))
    }

    /// Kinematic pressure in cm²/s².
    pub fn evaluate_pressure(&self, p: Point) -> Result<f64> {
        Ok(self.pressure_at(self.locate(p)?))
    }

    pub fn velocity_at(&self, loc: Located) -> [f64; 2] {
        let b = LagrangeTriangle::new(3);
        let mut v = [0.0; NV];
        b.eval(loc.xi, loc.eta, &mut v);
        let nn = self.n_nodes();
        let mut out = [0.0; 2];
        for (a, &k) in self.space.mesh.element(loc.element).iter().enumerate() {
            out[0] += v[a] * self.coeffs[k];
            out[1] += v[a] * self.coeffs[nn + k];
        }
        out
    }

    pub fn gradient_at(&self, loc: Located) -> [[f64; 2]; 2] {
        let g = self.physical_basis_gradients(loc);
        let nn = self.n_nodes();
        let mut out = [[0.0; 2]; 2];
        for (a, &k) in self.space.mesh.element(loc.element).iter().enumerate() {
            for j in 0..2 {
                out[0][j] += self.coeffs[k] * g[a][j];
                out[1][j] += self.coeffs[nn + k] * g[a][j];
            }
        }
        out
    }

    pub fn pressure_at(&self, loc: Located) -> f64 {
        let b = LagrangeTriangle::new(2);
        let mut v = [0.0; NP];
        b.eval(loc.xi, loc.eta, &mut v);
        let p = self.pressure_coeffs();
        (0..NP).map(|a| v[a] * p[self.space.p_conn[loc.element * NP + a]]).sum()
    }

    fn physical_basis_gradients(&self, loc: Located) -> [[f64; 2]; NV] {
        let b = LagrangeTriangle::new(3);
        let mut v = [0.0; NV];
        let mut dref = [[0.0; 2]; NV];
        b.eval_with_grad(loc.xi, loc.eta, &mut v, &mut dref);
        let mut j = [[0.0; 2]; 2];
        for (a, &k) in self.space.mesh.element(loc.element).iter().enumerate() {
            let p = self.space.mesh.nodes[k];
            for d in 0..2 {
                j[0][d] += dref[a][0] * p[d];
                j[1][d] += dref[a][1] * p[d];
            }
        }
        physical_gradients(&dref, j, det(j))
    }
}

/// Tangential traction at the point of the discrete wall nearest to a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallTraction {
    /// Closest point on the curved mesh boundary.
    pub point: Point,
    /// Outward unit normal of the discrete wall there.
    pub normal: Point,
    /// `(I − nnᵀ) σ n` with `σ = 2μ ε − P I`, Pa.
    pub tau: [f64; 2],
    /// `μ (I − nnᵀ) ∇v n`, Pa.
    pub tau_shortcut: [f64; 2],
}

pub fn wall_traction(sol: &FlowSolution, sample: &WallSample) -> Result<WallTraction> {
    let mesh = &sol.space.mesh;
    let basis = mesh.basis();
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for f in mesh.boundary_faces.iter().filter(|f| f.tag == BoundaryTag::Wall) {
        let (t, d2) = closest_on_face(mesh, &basis, f.element, f.local_edge, sample.point);
        if best.is_none_or(|b| d2 < b.0) {
            best = Some((d2, f.element, f.local_edge, t));
        }
    }
    let (_, e, le, t) = best.ok_or_else(|| Error::InvalidArgument("mesh has no wall faces".into()))?;
    let [xi, eta] = LagrangeTriangle::edge_point(le, t);
    let (x, j) = mesh.map(&basis, e, xi, eta);
    let dir = LagrangeTriangle::edge_direction(le);
    let tan = [j[0][0] * dir[0] + j[1][0] * dir[1], j[0][1] * dir[0] + j[1][1] * dir[1]];
    let len = tan[0].hypot(tan[1]);
    let n = [tan[1] / len, -tan[0] / len];

    let loc = Located { element: e, xi, eta };
    let g = sol.gradient_at(loc);
    let mu = sol.props.mu_dyn();
    let p = sol.props.pressure_pa(sol.pressure_at(loc));
    let sigma = [
        [2.0 * mu * g[0][0] - p, mu * (g[0][1] + g[1][0])],
        [mu * (g[0][1] + g[1][0]), 2.0 * mu * g[1][1] - p],
    ];
    let tr = [
        sigma[0][0] * n[0] + sigma[0][1] * n[1],
        sigma[1][0] * n[0] + sigma[1][1] * n[1],
    ];
    let gn = [
        mu * (g[0][0] * n[0] + g[0][1] * n[1]),
        mu * (g[1][0] * n[0] + g[1][1] * n[1]),
    ];
    Ok(WallTraction {
        point: x,
        normal: n,
        tau: tangential(tr, n),
        tau_shortcut: tangential(gn, n),
    })
}

fn tangential(v: [f64; 2], n: Point) -> [f64; 2] {
    let vn = v[0] * n[0] + v[1] * n[1];
    [v[0] - vn * n[0], v[1] - vn * n[1]]
}

/// Parameter on local edge `le` of the point nearest to `p`, with its squared
/// distance.
fn closest_on_face(mesh: &crate::mesh::Mesh, basis: &LagrangeTriangle, e: usize, le: usize, p: Point) -> (f64, f64) {
    let at = |t: f64| {
        let [xi, eta] = LagrangeTriangle::edge_point(le, t);
        let (x, j) = mesh.map(basis, e, xi, eta);
        let d = LagrangeTriangle::edge_direction(le);
        (x, [j[0][0] * d[0] + j[1][0] * d[1], j[0][1] * d[0] + j[1][1] * d[1]])
    };
    let (a, _) = at(0.0);
    let (b, _) = at(1.0);
    let ab = [b[0] - a[0], b[1] - a[1]];
    let mut t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
    for _ in 0..30 {
        let (x, xt) = at(t);
        let step = ((x[0] - p[0]) * xt[0] + (x[1] - p[1]) * xt[1]) / (xt[0] * xt[0] + xt[1] * xt[1]);
        let next = (t - step).clamp(0.0, 1.0);
        let done = (next - t).abs() < 1e-15;
        t = next;
        if done {
            break;
        }
    }
    let (x, _) = at(t);
    (t, (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2))
}

/// σ_wss = ‖τ‖ at each sample, from the full traction.
pub fn compute_wss(sol: &FlowSolution, samples: &[WallSample], method: Method) -> Result<WssProfile> {
    let wss = samples
        .iter()
        .map(|s| wall_traction(sol, s).map(|t| t.tau[0].hypot(t.tau[1])))
        .collect::<Result<Vec<_>>>()?;
    WssProfile::new(method, samples.to_vec(), wss)
}
