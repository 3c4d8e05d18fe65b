//! Simulation-based imaging: fit the inflow parameter of the flow model to
//! voxel data and take the WSS of the fitted flow.
//!
//! The cost is `I(θ) = Σ_i (α_i/2) ‖Ξ_i(v_H(θ)) − v̄_i‖²`. Gradients come
//! from the discrete adjoint of the converged Newton residual; the
//! optimizer is BFGS (an exact secant in one dimension) with Armijo
//! backtracking inside the admissible box.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{compute_wss, solve_steady_ns, FlowSolution, FlowSpace, FluidProps, SolverOptions};
use crate::mri::PsfOperator;
use crate::mri::VoxelData;
use crate::profile::{Method, WallSample, WssProfile};

/// Admissible interval for θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lo: f64,
    pub hi: f64,
}

impl ParamBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid parameter box [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn project(&self, theta: f64) -> f64 {
        theta.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Gradient tolerance relative to `max(1, |I(θ0)|)`.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// First step length as a fraction of `max(|θ0|, 1)`.
    pub first_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iterations: 100,
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            first_step: 0.25,
        }
    }
}

/// Everything needed to evaluate and minimize the misfit.
#[derive(Debug, Clone)]
pub struct SbiProblem {
    pub space: Arc<FlowSpace>,
    pub props: FluidProps,
    /// Point-spread operator on the reconstruction mesh.
    pub psf: Arc<PsfOperator>,
    pub observed: VoxelData,
    /// Voxels entering the misfit.
    pub alpha: Vec<bool>,
    pub bounds: ParamBox,
    pub theta0: f64,
    pub settings: OptimizerSettings,
    pub solver: SolverOptions,
    /// Newton starting state for the first forward solve.
    pub warm_start: Option<Arc<Vec<f64>>>,
}

/// A converged forward solve with its misfit.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub theta: f64,
    pub cost: f64,
    pub solution: FlowSolution,
    /// `Ξ_i(v_H) − v̄_i` on masked voxels, zero elsewhere.
    pub misfit: Vec<[f64; 2]>,
}

impl SbiProblem {
    /// Problem with the plug-in initial guess and the box `[0, 4 θ_plug-in]`.
    pub fn new(
        space: Arc<FlowSpace>,
        props: FluidProps,
        psf: Arc<PsfOperator>,
        observed: VoxelData,
        settings: OptimizerSettings,
        solver: SolverOptions,
    ) -> Result<Self> {
        let g = &psf.grid;
        if observed.grid.nx != g.nx
            || observed.grid.ny != g.ny
            || observed.grid.dx != g.dx
            || observed.grid.dy != g.dy
            || observed.grid.origin != g.origin
        {
            return Err(Error::InvalidArgument("observed data grid does not match the problem grid".into()));
        }
        if psf.n_nodes() != space.n_nodes() {
            return Err(Error::InvalidArgument("point-spread operator built on another mesh".into()));
        }
        let alpha: Vec<bool> = observed.grid.alpha.iter().zip(&g.alpha).map(|(&a, &b)| a && b).collect();
        let plug = plugin_theta(&observed);
        let bounds = ParamBox::new(0.0, if plug > 0.0 { 4.0 * plug } else { 1.0 })?;
        Ok(Self {
            space,
            props,
            psf,
            observed,
            alpha,
            bounds,
            theta0: bounds.project(plug),
            settings,
            solver,
            warm_start: None,
        })
    }

    /// Forward solve at `theta` (warm-started from `warm` when given) and
    /// misfit.
    pub fn evaluate(&self, theta: f64, warm: Option<&[f64]>) -> Result<Evaluation> {
        let solution = solve_steady_ns(&self.space, &self.props, theta, &self.solver, warm)?;
        Ok(self.misfit_of(solution))
    }

    fn misfit_of(&self, solution: FlowSolution) -> Evaluation {
        let pred = self.psf.apply(&solution.coeffs);
        let mut cost = 0.0;
        let misfit: Vec<[f64; 2]> = pred
            .iter()
            .zip(&self.observed.values)
            .zip(&self.alpha)
            .map(|((p, o), &a)| {
                if !a {
                    return [0.0; 2];
                }
                let r = [p[0] - o[0], p[1] - o[1]];
                cost += 0.5 * (r[0] * r[0] + r[1] * r[1]);
                r
            })
            .collect();
        Evaluation {
            theta: solution.theta,
            cost,
            solution,
            misfit,
        }
    }

    pub fn cost(&self, theta: f64) -> Result<f64> {
        Ok(self.evaluate(theta, None)?.cost)
    }

    /// `dI/dθ` by the discrete adjoint: `Jᵀλ = −Wᵀr`, then
    /// `dI/dθ = λᵀ ∂R/∂θ = −Σ_k λ_k g_k` over the imposed rows.
    pub fn gradient(&self, eval: &Evaluation) -> Result<f64> {
        let lambda = eval.solution.solve_adjoint(&self.adjoint_rhs(eval))?;
        Ok(self.dirichlet_sum(&lambda))
    }

    /// The gradient together with `dU/dθ`, which predicts the state at
    /// nearby θ for warm starts.
    pub fn gradient_and_tangent(&self, eval: &Evaluation) -> Result<(f64, Vec<f64>)> {
        let (lambda, tangent) = eval.solution.adjoint_and_tangent(&self.adjoint_rhs(eval))?;
        Ok((self.dirichlet_sum(&lambda), tangent))
    }

    fn adjoint_rhs(&self, eval: &Evaluation) -> Vec<f64> {
        let mut rhs = vec![0.0; self.space.n_dofs()];
        self.psf.apply_transpose(&eval.misfit, &mut rhs);
        for v in &mut rhs {
            *v = -*v;
        }
        rhs
    }

    fn dirichlet_sum(&self, lambda: &[f64]) -> f64 {
        -self.space.dirichlet().iter().map(|&(k, g)| lambda[k] * g).sum::<f64>()
    }

    /// Central finite difference of the cost with step `h`, both sides
    /// warm-started from the solution at `theta` and solved tightly.
    pub fn gradient_fd(&self, theta: f64, h: f64) -> Result<f64> {
        let tight = SolverOptions {
            tol: self.solver.tol.min(1e-12),
            ..self.solver
        };
        let base = solve_steady_ns(&self.space, &self.props, theta, &tight, None)?;
        let at = |t: f64| -> Result<f64> {
            let s = solve_steady_ns(&self.space, &self.props, t, &tight, Some(&base.coeffs))?;
            Ok(self.misfit_of(s).cost)
        };
        Ok((at(theta + h)? - at(theta - h)?) / (2.0 * h))
    }
}

/// `1.5 ×` the mean voxel speed over the masked voxels of the upstream-most
/// column that has any: the mean of a parabola is two thirds of its peak.
pub fn plugin_theta(data: &VoxelData) -> f64 {
    let g = &data.grid;
    for ix in 0..g.nx {
        let speeds: Vec<f64> = (0..g.ny)
            .map(|iy| g.index(ix, iy))
            .filter(|&i| g.alpha[i])
            .map(|i| data.values[i][0].hypot(data.values[i][1]))
            .collect();
        if !speeds.is_empty() {
            return 1.5 * speeds.iter().sum::<f64>() / speeds.len() as f64;
        }
    }
    0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Projected gradient below tolerance.
    Gradient,
    /// The step no longer changes θ.
    Step,
    MaxIterations,
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub theta: f64,
    pub cost: f64,
    pub gradient: f64,
    /// Line-search step accepted to reach this iterate (0 for the start).
    pub step: f64,
    pub backtracks: usize,
    /// Cost predicted by the Armijo bound for this step.
    pub armijo_bound: f64,
}

/// Serializable summary of one optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbiReport {
    pub theta0: f64,
    pub bounds: ParamBox,
    pub theta_star: f64,
    pub cost: f64,
    pub gradient: f64,
    pub grad_tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub forward_solves: usize,
    pub adjoint_solves: usize,
    pub trace: Vec<TraceEntry>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SbiResult {
    pub report: SbiReport,
    pub solution: FlowSolution,
}

impl SbiResult {
    pub fn theta_star(&self) -> f64 {
        self.report.theta_star
    }
}

fn projected_gradient(b: &ParamBox, theta: f64, g: f64) -> f64 {
    if (theta <= b.lo && g > 0.0) || (theta >= b.hi && g < 0.0) {
        0.0
    } else {
        g
    }
}

/// Minimizes the misfit from `problem.theta0`.
pub fn optimize(problem: &SbiProblem) -> Result<SbiResult> {
    let start = Instant::now();
    let st = &problem.settings;
    let b = problem.bounds;
    let mut forward = 1;
    let mut adjoint = 1;
    let mut cur = problem.evaluate(b.project(problem.theta0), problem.warm_start.as_deref().map(|v| v.as_slice()))?;
    let (mut g, mut tangent) = problem.gradient_and_tangent(&cur)?;
    let tol = st.grad_tol * cur.cost.abs().max(1.0);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        theta: cur.theta,
        cost: cur.cost,
        gradient: g,
        step: 0.0,
        backtracks: 0,
        armijo_bound: cur.cost,
    }];
    // inverse Hessian estimate; the first step has a fixed length
    let mut h_inv = if g != 0.0 {
        st.first_step * problem.theta0.abs().max(1.0) / g.abs()
    } else {
        0.0
    };
    let mut termination = Termination::MaxIterations;
    for it in 1..=st.max_iterations {
        if projected_gradient(&b, cur.theta, g).abs() <= tol {
            termination = Termination::Gradient;
            break;
        }
        let dir = -h_inv * g;
        let mut alpha = 1.0;
        let mut accepted = None;
        for k in 0..=st.max_backtracks {
            let t = b.project(cur.theta + alpha * dir);
            let s = t - cur.theta;
            if s == 0.0 {
                break;
            }
            let bound = cur.cost + st.c1 * g * s;
            forward += 1;
            // a failed forward solve counts as an infinite cost
            // first-order prediction of the state at t
            let guess: Vec<f64> = cur.solution.coeffs.iter().zip(&tangent).map(|(u, d)| u + s * d).collect();
            if let Ok(ev) = problem.evaluate(t, Some(&guess)) {
                if ev.cost <= bound {
                    accepted = Some((ev, k, bound));
                    break;
                }
            }
            alpha *= st.backtrack;
        }
        let Some((next, backtracks, bound)) = accepted else {
            let s = b.project(cur.theta + alpha * dir) - cur.theta;
            termination = if s.abs() <= 1e-14 * cur.theta.abs().max(1.0) {
                Termination::Step
            } else {
                Termination::LineSearch
            };
            break;
        };
        let (g_next, t_next) = problem.gradient_and_tangent(&next)?;
        tangent = t_next;
        adjoint += 1;
        let s = next.theta - cur.theta;
        let y = g_next - g;
        if s * y > 0.0 {
            h_inv = s / y;
        }
        trace.push(TraceEntry {
            iteration: it,
            theta: next.theta,
            cost: next.cost,
            gradient: g_next,
            step: alpha,
            backtracks,
            armijo_bound: bound,
        });
        cur = next;
        g = g_next;
        if s.abs() <= 1e-14 * cur.theta.abs().max(1.0) {
            termination = Termination::Step;
            break;
        }
    }
    if termination == Termination::MaxIterations && projected_gradient(&b, cur.theta, g).abs() <= tol {
        termination = Termination::Gradient;
    }
    let report = SbiReport {
        theta0: problem.theta0,
        bounds: b,
        theta_star: cur.theta,
        cost: cur.cost,
        gradient: g,
        grad_tol: tol,
        iterations: trace.len() - 1,
        converged: matches!(termination, Termination::Gradient | Termination::Step),
        termination,
        forward_solves: forward,
        adjoint_solves: adjoint,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(SbiResult {
        report,
        solution: cur.solution,
    })
}

/// WSS of the reconstructed flow at the Γ samples.
pub fn sbi_wss(result: &SbiResult, samples: &[WallSample]) -> Result<WssProfile> {
    compute_wss(&result.solution, samples, Method::Sbi)
}

impl SbiReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
