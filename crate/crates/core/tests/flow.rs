use std::sync::Arc;

use wss_sbi::fem::{
    compute_wss, continuation_schedule, reynolds_to_theta, solve_steady_ns, wall_traction, FlowSolution, FlowSpace,
    FluidProps, SolverOptions,
};
use wss_sbi::geometry::{BoundaryTag, Geometry, GeometrySpec};
use wss_sbi::harness::build_space;
use wss_sbi::metrics::build_gamma;
use wss_sbi::mri::ScanRegion;
use wss_sbi::profile::Method;

fn stenosis_space() -> Arc<FlowSpace> {
    Arc::new(build_space(&Geometry::Channel(GeometrySpec::stenosis()), 0.123).unwrap())
}

fn solve(space: &Arc<FlowSpace>, re: f64) -> FlowSolution {
    let props = FluidProps::blood();
    let theta = reynolds_to_theta(re, space.geometry.diameter(), &props).unwrap();
    solve_steady_ns(space, &props, theta, &SolverOptions::default(), None).unwrap()
}

#[test]
fn poiseuille_is_reproduced() {
    let spec = GeometrySpec::straight(0.3, 0.0, 1.5);
    let geo = Geometry::Channel(spec);
    let space = Arc::new(build_space(&geo, 0.12).unwrap());
    let props = FluidProps::blood();
    for re in [10.0, 400.0, 1000.0] {
        let sol = solve(&space, re);
        let theta = sol.theta;
        for y in [-0.29, -0.1, 0.0, 0.17, 0.25] {
            let v = sol.evaluate_velocity([0.77, y]).unwrap();
            let exact = theta * (1.0 - (y / 0.3) * (y / 0.3));
            assert!((v[0] - exact).abs() < 1e-10 * theta, "Re {re}, y {y}: {} vs {exact}", v[0]);
            assert!(v[1].abs() < 1e-10 * theta);
        }
        // traction-free outflow with the Laplacian form: zero pressure
        let p = sol.evaluate_pressure([1.0, 0.0]).unwrap();
        let dp = 2.0 * props.nu_cgs() * theta / (0.3 * 0.3);
        assert!((p - dp * 0.5).abs() < 1e-8 * dp.max(1.0), "pressure {p} vs {}", dp * 0.5);
    }
}

#[test]
fn mass_is_conserved() {
    let space = stenosis_space();
    let sol = solve(&space, 100.0);
    let inflow = sol.boundary_flux(BoundaryTag::Inflow);
    let outflow = sol.boundary_flux(BoundaryTag::Outflow);
    let exact = 4.0 / 3.0 * sol.theta * 0.3;
    // the Gaussian tail leaves the inflow end 4.5e-7 cm short of B0 and the
    // corner nodes carry the wall's zero, hence the 1e-6
    assert!((inflow + exact).abs() < 1e-6 * exact, "{inflow} vs {}", -exact);
    assert!((inflow + outflow).abs() < 1e-8 * exact, "net flux {}", inflow + outflow);
    assert!(sol.boundary_flux(BoundaryTag::Wall).abs() < 1e-12 * exact);
}

#[test]
fn newton_meets_its_tolerance_and_warm_starts_agree() {
    let space = stenosis_space();
    let props = FluidProps::blood();
    let cold = solve(&space, 1000.0);
    assert!(cold.report.residual <= 1e-10 * cold.report.reference);
    assert_eq!(cold.report.stages, continuation_schedule(1000.0).len());
    assert!((cold.residual_norm() - cold.report.residual).abs() <= 1e-10 * cold.report.reference);

    let lower = solve(&space, 900.0);
    let warm = solve_steady_ns(&space, &props, cold.theta, &SolverOptions::default(), Some(&lower.coeffs)).unwrap();
    assert_eq!(warm.report.stages, 1);
    let scale = cold.peak_speed();
    let diff = cold
        .coeffs
        .iter()
        .zip(&warm.coeffs)
        .take(2 * space.n_nodes())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-8 * scale, "warm and cold states differ by {diff}");
}

#[test]
fn wall_traction_reduces_to_the_normal_derivative() {
    let geo = Geometry::Channel(GeometrySpec::stenosis());
    let space = stenosis_space();
    let sol = solve(&space, 1000.0);
    let gamma = build_gamma(&geo, &ScanRegion::stenosis_default(), 200).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for s in &gamma {
        let t = wall_traction(&sol, s).unwrap();
        num += (t.tau[0] - t.tau_shortcut[0]).powi(2) + (t.tau[1] - t.tau_shortcut[1]).powi(2);
        den += t.tau[0].powi(2) + t.tau[1].powi(2);
        // the discrete wall point is the exact one to within the geometry error
        assert!((t.point[0] - s.point[0]).hypot(t.point[1] - s.point[1]) < 1e-6);
    }
    assert!((num / den).sqrt() < 1e-8);
    // stress peaks near the throat
    let wss = compute_wss(&sol, &gamma, Method::Truth).unwrap();
    let k = (0..wss.len()).max_by(|&a, &b| wss.wss[a].total_cmp(&wss.wss[b])).unwrap();
    assert!((wss.samples[k].point[0] - 3.0).abs() < 0.5, "peak at x = {}", wss.samples[k].point[0]);
}

#[test]
fn zero_inflow_gives_rest() {
    let space = stenosis_space();
    let sol = solve_steady_ns(&space, &FluidProps::blood(), 0.0, &SolverOptions::default(), None).unwrap();
    assert!(sol.coeffs.iter().all(|&c| c == 0.0));
}

#[test]
fn solutions_round_trip_through_json() {
    let space = stenosis_space();
    let sol = solve(&space, 100.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    sol.write(&path).unwrap();
    let back = FlowSolution::read(&path, &space).unwrap();
    assert_eq!(back.coeffs, sol.coeffs);
    assert_eq!(back.theta, sol.theta);
}

#[test]
fn solves_are_deterministic() {
    let space = stenosis_space();
    let a = solve(&space, 500.0);
    let b = solve(&space, 500.0);
    assert!(a.coeffs.iter().zip(&b.coeffs).all(|(x, y)| x.to_bits() == y.to_bits()));
}
