use std::path::Path;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use serde::{Deserialize, Serialize};

use super::space::{FlowSpace, NL, NP, NV};
use super::{theta_to_reynolds, FluidProps};
use crate::error::{Error, Result};

/// Newton and continuation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Residual reduction relative to the lifted zero state.
    pub tol: f64,
    pub max_iterations: usize,
    /// Ramp through intermediate Reynolds numbers on cold starts.
    pub continuation: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 30,
            continuation: true,
        }
    }
}

/// Reynolds numbers visited on a cold start: `100·3^k` below `re / 1.5`,
/// then `re` itself.
pub fn continuation_schedule(re: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = 100.0;
    while s < re / 1.5 {
        out.push(s);
        s *= 3.0;
    }
    out.push(re);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    /// Newton iterations summed over continuation stages.
    pub iterations: usize,
    pub stages: usize,
    /// Final residual norm.
    pub residual: f64,
    /// Residual norm of the lifted zero state at the final θ.
    pub reference: f64,
}

/// Converged discrete state for one inflow parameter.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub space: Arc<FlowSpace>,
    pub props: FluidProps,
    pub theta: f64,
    /// `[u1, u2, p]` with the pressure in cm²/s².
    pub coeffs: Vec<f64>,
    pub report: NewtonReport,
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    theta: f64,
    props: FluidProps,
    n_nodes: usize,
    n_pressure: usize,
    report: NewtonReport,
    coeffs: Vec<f64>,
}

/// Solves the steady problem for inflow peak `theta` (cm/s). `initial`
/// warm-starts Newton; without it, large Reynolds numbers are reached by
/// continuation.
pub fn solve_steady_ns(
    space: &Arc<FlowSpace>,
    props: &FluidProps,
    theta: f64,
    opts: &SolverOptions,
    initial: Option<&[f64]>,
) -> Result<FlowSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("inflow parameter must be finite, got {theta}")));
    }
    let nu = props.nu_cgs();
    let mut ws = Workspace::new(space);
    if let Some(u0) = initial {
        if u0.len() != space.n_dofs() {
            return Err(Error::InvalidArgument("warm start has the wrong length".into()));
        }
        let mut u = u0.to_vec();
        if let Ok(report) = newton(space, &mut ws, nu, theta, opts, &mut u, 0) {
            return Ok(finish(space, props, theta, u, report, 1));
        }
    }
    let d = space.geometry.diameter();
    let re = theta_to_reynolds(theta.abs(), d, props);
    let stages = if opts.continuation && re > 300.0 {
        continuation_schedule(re)
    } else {
        vec![re]
    };
    let mut u = space.lifted_zero(0.0);
    let mut total = 0;
    let mut last = None;
    for (k, &r) in stages.iter().enumerate() {
        let t = if k + 1 == stages.len() { theta } else { theta.signum() * r / re * theta.abs() };
        let report = newton(space, &mut ws, nu, t, opts, &mut u, k)?;
        total += report.iterations;
        last = Some(report);
    }
    let mut report = last.expect("at least one stage");
    report.iterations = total;
    Ok(finish(space, props, theta, u, report, stages.len()))
}

fn finish(
    space: &Arc<FlowSpace>,
    props: &FluidProps,
    theta: f64,
    coeffs: Vec<f64>,
    mut report: NewtonReport,
    stages: usize,
) -> FlowSolution {
    report.stages = stages;
    FlowSolution {
        space: Arc::clone(space),
        props: *props,
        theta,
        coeffs,
        report,
    }
}

struct Workspace {
    res: Vec<f64>,
    trial_res: Vec<f64>,
    vals: Vec<f64>,
    trial: Vec<f64>,
}

impl Workspace {
    fn new(space: &FlowSpace) -> Self {
        let n = space.n_dofs();
        Self {
            res: vec![0.0; n],
            trial_res: vec![0.0; n],
            vals: vec![0.0; space.row_idx.len()],
            trial: vec![0.0; n],
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn newton(
    space: &FlowSpace,
    ws: &mut Workspace,
    nu: f64,
    theta: f64,
    opts: &SolverOptions,
    u: &mut [f64],
    stage: usize,
) -> Result<NewtonReport> {
    let lift = space.lifted_zero(theta);
    assemble(space, nu, theta, &lift, &mut ws.res, None);
    let reference = norm(&ws.res);
    space.impose(u, theta);
    let diverged = |residual: f64| Error::NewtonDivergence { stage, theta, residual };
    let mut rn = f64::NAN;
    for it in 0..=opts.max_iterations {
        assemble(space, nu, theta, u, &mut ws.res, Some(&mut ws.vals));
        rn = norm(&ws.res);
        if !rn.is_finite() {
            return Err(diverged(rn));
        }
        if rn <= opts.tol * reference || rn == 0.0 {
            return Ok(NewtonReport {
                iterations: it,
                stages: 1,
                residual: rn,
                reference,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let lu = factorize(space, &ws.vals)?;
        let mut delta = ws.res.clone();
        lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut delta, space.n_dofs(), 1));
        let mut alpha = 1.0;
        loop {
            for ((t, &x), &d) in ws.trial.iter_mut().zip(u.iter()).zip(&delta) {
                *t = x - alpha * d;
            }
            assemble(space, nu, theta, &ws.trial, &mut ws.trial_res, None);
            let rt = norm(&ws.trial_res);
            if rt.is_finite() && rt < (1.0 - 1e-4 * alpha) * rn {
                break;
            }
            alpha *= 0.5;
            if alpha < 1.0 / 1024.0 {
                return Err(diverged(rn));
            }
        }
        u.copy_from_slice(&ws.trial);
    }
    Err(diverged(rn))
}

pub(crate) fn factorize(space: &FlowSpace, vals: &[f64]) -> Result<Lu<usize, f64>> {
    let n = space.n_dofs();
    let sym = SymbolicSparseColMatRef::new_checked(n, n, &space.col_ptr, None, &space.row_idx);
    let mat = SparseColMatRef::new(sym, vals);
    Lu::try_new_with_symbolic(space.symbolic.clone(), mat).map_err(|e| Error::Factorization(format!("{e:?}")))
}

/// Residual and, optionally, Jacobian values in the space's CSC layout.
/// Strongly imposed rows read `u_k − θ g_k` with a unit diagonal.
pub(crate) fn assemble(space: &FlowSpace, nu: f64, theta: f64, u: &[f64], res: &mut [f64], mut jac: Option<&mut [f64]>) {
    res.fill(0.0);
    if let Some(j) = jac.as_deref_mut() {
        j.fill(0.0);
    }
    let n_q = space.n_q;
    let mut kl = [0.0; NL * NL];
    for e in 0..space.mesh.n_elements() {
        let dofs = space.local_dofs(e);
        let ul: [f64; NL] = std::array::from_fn(|a| u[dofs[a]]);
        let mut rl = [0.0; NL];
        let with_jac = jac.is_some();
        if with_jac {
            kl.fill(0.0);
        }
        for q in 0..n_q {
            let w = space.wdet[e * n_q + q];
            let phi = &space.phi[q];
            let psi = &space.psi[q];
            let g = &space.grad[e * n_q + q];
            let mut uv = [0.0; 2];
            let mut gu = [[0.0; 2]; 2];
            for a in 0..NV {
                let (u1, u2) = (ul[a], ul[NV + a]);
                uv[0] += u1 * phi[a];
                uv[1] += u2 * phi[a];
                gu[0][0] += u1 * g[a][0];
                gu[0][1] += u1 * g[a][1];
                gu[1][0] += u2 * g[a][0];
                gu[1][1] += u2 * g[a][1];
            }
            let p: f64 = (0..NP).map(|b| ul[2 * NV + b] * psi[b]).sum();
            let div = gu[0][0] + gu[1][1];
            let conv = [
                uv[0] * gu[0][0] + uv[1] * gu[0][1],
                uv[0] * gu[1][0] + uv[1] * gu[1][1],
            ];
            for a in 0..NV {
                for i in 0..2 {
                    rl[i * NV + a] += w * (conv[i] * phi[a] + nu * (gu[i][0] * g[a][0] + gu[i][1] * g[a][1]) - p * g[a][i]);
                }
            }
            for b in 0..NP {
                rl[2 * NV + b] -= w * psi[b] * div;
            }
            if !with_jac {
                continue;
            }
            let adv: [f64; NV] = std::array::from_fn(|c| uv[0] * g[c][0] + uv[1] * g[c][1]);
            for a in 0..NV {
                let wa = w * phi[a];
                let ra = a * NL;
                let rb = (NV + a) * NL;
                for c in 0..NV {
                    let diag = wa * adv[c] + w * nu * (g[a][0] * g[c][0] + g[a][1] * g[c][1]);
                    let pc = wa * phi[c];
                    kl[ra + c] += diag + pc * gu[0][0];
                    kl[ra + NV + c] += pc * gu[0][1];
                    kl[rb + c] += pc * gu[1][0];
                    kl[rb + NV + c] += diag + pc * gu[1][1];
                }
                for b in 0..NP {
                    let v = w * psi[b];
                    let rp = (2 * NV + b) * NL;
                    kl[ra + 2 * NV + b] -= v * g[a][0];
                    kl[rb + 2 * NV + b] -= v * g[a][1];
                    kl[rp + a] -= v * g[a][0];
                    kl[rp + NV + a] -= v * g[a][1];
                }
            }
        }
        for (r, &d) in dofs.iter().enumerate() {
            if !space.is_dirichlet[d] {
                res[d] += rl[r];
            }
        }
        if let Some(vals) = jac.as_deref_mut() {
            let slots = &space.slots[e * NL * NL..(e + 1) * NL * NL];
            for (s, &k) in slots.iter().zip(kl.iter()) {
                if *s != usize::MAX {
                    vals[*s] += k;
                }
            }
        }
    }
    for &(k, g) in &space.dirichlet {
        res[k] = u[k] - theta * g;
    }
    if let Some(vals) = jac {
        for &s in &space.dirichlet_diag {
            vals[s] = 1.0;
        }
    }
}

impl FlowSolution {
    pub fn n_nodes(&self) -> usize {
        self.space.n_nodes()
    }

    pub fn velocity_at_node(&self, k: usize) -> [f64; 2] {
        [self.coeffs[k], self.coeffs[self.n_nodes() + k]]
    }

    pub fn pressure_coeffs(&self) -> &[f64] {
        &self.coeffs[2 * self.n_nodes()..]
    }

    /// Largest nodal speed ‖v_h‖.
    pub fn peak_speed(&self) -> f64 {
        (0..self.n_nodes())
            .map(|k| {
                let v = self.velocity_at_node(k);
                v[0].hypot(v[1])
            })
            .fold(0.0, f64::max)
    }

    /// Current discrete residual norm (recomputed).
    pub fn residual_norm(&self) -> f64 {
        let mut res = vec![0.0; self.coeffs.len()];
        assemble(&self.space, self.props.nu_cgs(), self.theta, &self.coeffs, &mut res, None);
        norm(&res)
    }

    /// Solves `Jᵀ λ = rhs` with the Jacobian at this state.
    pub fn solve_adjoint(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.jacobian_lu()?;
        let mut x = rhs.to_vec();
        lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, rhs.len(), 1));
        Ok(x)
    }

    /// dU/dθ from the linearized residual: `J dU = −∂R/∂θ`.
    pub fn tangent(&self) -> Result<Vec<f64>> {
        let lu = self.jacobian_lu()?;
        let mut x = vec![0.0; self.coeffs.len()];
        for &(k, g) in self.space.dirichlet() {
            x[k] = g;
        }
        lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.coeffs.len(), 1));
        Ok(x)
    }

    /// Adjoint solution for `rhs` and the tangent, sharing one factorization.
    pub fn adjoint_and_tangent(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let lu = self.jacobian_lu()?;
        let n = self.coeffs.len();
        let mut lambda = rhs.to_vec();
        lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut lambda, n, 1));
        let mut t = vec![0.0; n];
        for &(k, g) in self.space.dirichlet() {
            t[k] = g;
        }
        lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut t, n, 1));
        Ok((lambda, t))
    }

    fn jacobian_lu(&self) -> Result<Lu<usize, f64>> {
        let mut res = vec![0.0; self.coeffs.len()];
        let mut vals = vec![0.0; self.space.row_idx.len()];
        assemble(&self.space, self.props.nu_cgs(), self.theta, &self.coeffs, &mut res, Some(&mut vals));
        factorize(&self.space, &vals)
    }

    /// Net volumetric flux `∮ v·n ds` through the tagged boundary (cm²/s).
    pub fn boundary_flux(&self, tag: crate::geometry::BoundaryTag) -> f64 {
        let mesh = &self.space.mesh;
        let basis = mesh.basis();
        let gl = crate::quadrature::GaussLegendre::new(8);
        let mut val = [0.0; NV];
        let mut grad = [[0.0; 2]; NV];
        let mut total = 0.0;
        for f in mesh.boundary_faces.iter().filter(|f| f.tag == tag) {
            let el = mesh.element(f.element);
            let d = crate::lagrange::LagrangeTriangle::edge_direction(f.local_edge);
            for (t, w) in gl.on_interval(0.0, 1.0) {
                let [xi, eta] = crate::lagrange::LagrangeTriangle::edge_point(f.local_edge, t);
                basis.eval_with_grad(xi, eta, &mut val, &mut grad);
                let mut tan = [0.0; 2];
                let mut v = [0.0; 2];
                for (a, &k) in el.iter().enumerate() {
                    let p = mesh.nodes[k];
                    let dt = grad[a][0] * d[0] + grad[a][1] * d[1];
                    tan[0] += dt * p[0];
                    tan[1] += dt * p[1];
                    let vk = self.velocity_at_node(k);
                    v[0] += val[a] * vk[0];
                    v[1] += val[a] * vk[1];
                }
                // outward normal × |tangent| for counter-clockwise elements
                total += w * (v[0] * tan[1] - v[1] * tan[0]);
            }
        }
        total
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SolutionFile {
            theta: self.theta,
            props: self.props,
            n_nodes: self.n_nodes(),
            n_pressure: self.space.n_pressure(),
            report: self.report,
            coeffs: self.coeffs.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Reads coefficients written by [`write`](Self::write) onto a space
    /// built from the same mesh.
    pub fn read(path: impl AsRef<Path>, space: &Arc<FlowSpace>) -> Result<Self> {
        let path = path.as_ref();
        let file: SolutionFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.n_nodes != space.n_nodes() || file.n_pressure != space.n_pressure() || file.coeffs.len() != space.n_dofs() {
            return Err(Error::parse(path, "solution does not match the mesh"));
        }
        Ok(Self {
            space: Arc::clone(space),
            props: file.props,
            theta: file.theta,
            coeffs: file.coeffs,
            report: file.report,
        })
    }
}
