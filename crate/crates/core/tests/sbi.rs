use std::sync::Arc;

use wss_sbi::fem::{solve_steady_ns, FlowSolution, FlowSpace, FluidProps, SolverOptions};
use wss_sbi::geometry::{Geometry, GeometrySpec};
use wss_sbi::harness::build_space;
use wss_sbi::metrics::{build_gamma, relative_l2_error};
use wss_sbi::mri::{add_noise, PsfOperator, ScanRegion, VoxelData, VoxelGrid};
use wss_sbi::profile::Method;
use wss_sbi::sbi::{optimize, sbi_wss, OptimizerSettings, SbiProblem, SbiReport, Termination};

struct Setup {
    space: Arc<FlowSpace>,
    psf: Arc<PsfOperator>,
    truth: FlowSolution,
}

const THETA: f64 = 6.0;

fn setup(vpd: usize) -> Setup {
    let geo = Geometry::Channel(GeometrySpec::stenosis());
    let space = Arc::new(build_space(&geo, 0.123).unwrap());
    let truth = solve_steady_ns(&space, &FluidProps::blood(), THETA, &SolverOptions::default(), None).unwrap();
    let grid = VoxelGrid::new(ScanRegion::stenosis_default(), vpd, geo.diameter(), &geo).unwrap();
    let psf = Arc::new(PsfOperator::new(&space.mesh, &grid).unwrap());
    Setup { space, psf, truth }
}

impl Setup {
    fn clean(&self) -> VoxelData {
        VoxelData {
            grid: self.psf.grid.clone(),
            values: self.psf.apply(&self.truth.coeffs),
            kappa: 0.0,
            seed: None,
        }
    }

    fn problem(&self, data: VoxelData) -> SbiProblem {
        SbiProblem::new(
            self.space.clone(),
            FluidProps::blood(),
            self.psf.clone(),
            data,
            OptimizerSettings::default(),
            SolverOptions::default(),
        )
        .unwrap()
    }
}

fn data_energy(d: &VoxelData) -> f64 {
    d.masked().map(|(_, v)| v[0] * v[0] + v[1] * v[1]).sum()
}

#[test]
fn cost_identities() {
    let s = setup(3);
    let clean = s.clean();
    let p = s.problem(clean.clone());
    let energy = data_energy(&clean);
    assert!(p.cost(THETA).unwrap() <= 1e-16 * energy);
    let at_rest = p.cost(0.0).unwrap();
    assert!((at_rest - 0.5 * energy).abs() < 1e-12 * energy);
}

#[test]
fn adjoint_matches_differences_and_has_the_right_sign() {
    let s = setup(3);
    let p = s.problem(s.clean());
    let t = 0.5 * THETA;
    let ga = p.gradient(&p.evaluate(t, None).unwrap()).unwrap();
    let gf = p.gradient_fd(t, 1e-4 * t).unwrap();
    assert!((ga - gf).abs() < 1e-6 * gf.abs(), "{ga} vs {gf}");
    assert!(ga < 0.0);
    // overshoot: cost rises, gradient positive
    let up = 1.05 * THETA;
    assert!(p.cost(up).unwrap() > p.cost(THETA).unwrap());
    assert!(p.gradient(&p.evaluate(up, None).unwrap()).unwrap() > 0.0);
    // the tangent agrees with a difference of states
    let e = p.evaluate(t, None).unwrap();
    let (g2, tangent) = p.gradient_and_tangent(&e).unwrap();
    assert_eq!(g2.to_bits(), ga.to_bits());
    let h = 1e-5 * t;
    let a = p.evaluate(t + h, Some(&e.solution.coeffs)).unwrap();
    let b = p.evaluate(t - h, Some(&e.solution.coeffs)).unwrap();
    let scale = tangent.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..tangent.len() {
        let fd = (a.solution.coeffs[k] - b.solution.coeffs[k]) / (2.0 * h);
        assert!((fd - tangent[k]).abs() < 1e-5 * scale, "dof {k}: {fd} vs {}", tangent[k]);
    }
}

#[test]
fn noise_free_data_is_recovered() {
    let s = setup(3);
    let mut p = s.problem(s.clean());
    p.theta0 = 0.5 * THETA;
    let r = optimize(&p).unwrap();
    assert!(r.report.converged);
    assert!((r.theta_star() - THETA).abs() < 1e-6 * THETA, "{}", r.theta_star());

    let geo = Geometry::Channel(GeometrySpec::stenosis());
    let gamma = build_gamma(&geo, &ScanRegion::stenosis_default(), 200).unwrap();
    let truth = wss_sbi::fem::compute_wss(&s.truth, &gamma, Method::Truth).unwrap();
    let sbi = sbi_wss(&r, &gamma).unwrap();
    for (a, b) in truth.wss.iter().zip(&sbi.wss) {
        assert!((a - b).abs() < 1e-6 * a.abs().max(1e-3));
    }
    assert!(relative_l2_error(&truth, &sbi, 5).unwrap() < 1e-4);

    // starting at the answer takes at most two iterations
    p.theta0 = THETA;
    let r = optimize(&p).unwrap();
    assert!(r.report.iterations <= 2, "{} iterations", r.report.iterations);
}

#[test]
fn accepted_steps_satisfy_armijo_and_stay_in_the_box() {
    let s = setup(9);
    let clean = s.clean();
    let noisy = add_noise(&clean, 0.15, 5, s.truth.peak_speed()).unwrap();
    let p = s.problem(noisy);
    let r = optimize(&p).unwrap();
    let rep = &r.report;
    assert!(rep.converged, "{:?}", rep.termination);
    for w in rep.trace.windows(2) {
        assert!(w[1].cost <= w[1].armijo_bound);
        assert!(w[1].cost <= w[0].cost);
    }
    for e in &rep.trace {
        assert!(p.bounds.contains(e.theta));
    }
    if rep.termination == Termination::Gradient {
        assert!(rep.gradient.abs() <= rep.grad_tol);
    }
    assert!((rep.theta_star - THETA).abs() < 0.1 * THETA);
    let back = SbiReport::from_json(&rep.to_json().unwrap()).unwrap();
    assert_eq!(&back, rep);
}

#[test]
fn cost_at_the_truth_follows_the_noise_energy() {
    // I(θ_true) = ½ Σ‖noise‖², whose mean is N·(κ·peak)²
    let s = setup(9);
    let clean = s.clean();
    let p = s.problem(clean.clone());
    let truth = p.evaluate(THETA, None).unwrap();
    let (kappa, peak) = (0.1, s.truth.peak_speed());
    let n = clean.grid.n_masked() as f64;
    let seeds = 40;
    let mut mean = 0.0;
    for seed in 0..seeds {
        let noisy = add_noise(&clean, kappa, seed, peak).unwrap();
        let pred = s.psf.apply(&truth.solution.coeffs);
        let cost: f64 = noisy
            .masked()
            .map(|(i, v)| 0.5 * ((pred[i][0] - v[0]).powi(2) + (pred[i][1] - v[1]).powi(2)))
            .sum();
        mean += cost / seeds as f64;
    }
    let expected = n * (kappa * peak).powi(2);
    assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
}

#[test]
fn mismatched_inputs_are_rejected() {
    let s = setup(3);
    let geo = Geometry::Channel(GeometrySpec::stenosis());
    let other = VoxelGrid::new(ScanRegion::stenosis_default(), 9, 0.6, &geo).unwrap();
    let data = VoxelData {
        values: vec![[0.0; 2]; other.len()],
        grid: other,
        kappa: 0.0,
        seed: None,
    };
    assert!(SbiProblem::new(
        s.space.clone(),
        FluidProps::blood(),
        s.psf.clone(),
        data,
        OptimizerSettings::default(),
        SolverOptions::default()
    )
    .is_err());
}
