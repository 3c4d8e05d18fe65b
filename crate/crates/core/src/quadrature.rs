//! Gauss–Legendre rules on intervals and collapsed (Duffy) rules on the
//! reference triangle `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`.

use std::f64::consts::PI;

/// A 1D rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * h;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature point on the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub xi: f64,
    pub eta: f64,
    pub weight: f64,
}

/// Collapsed tensor-product rule with `n × n` points. Weights sum to 1/2.
pub fn triangle_rule(n: usize) -> Vec<TriPoint> {
    let gl = GaussLegendre::new(n);
    let mut pts = Vec::with_capacity(n * n);
    for (u, wu) in gl.on_interval(0.0, 1.0) {
        for (v, wv) in gl.on_interval(0.0, 1.0) {
            pts.push(TriPoint {
                xi: u,
                eta: v * (1.0 - u),
                weight: wu * wv * (1.0 - u),
            });
        }
    }
    pts
}

/// The rule from [`triangle_rule`] replicated over the `m²` congruent
/// sub-triangles of a uniform refinement of the reference triangle.
pub fn subdivided_triangle_rule(n: usize, m: usize) -> Vec<TriPoint> {
    let base = triangle_rule(n);
    if m <= 1 {
        return base;
    }
    let h = 1.0 / m as f64;
    let scale = h * h;
    let mut pts = Vec::with_capacity(base.len() * m * m);
    for i in 0..m {
        for j in 0..(m - i) {
            let (x0, y0) = (i as f64 * h, j as f64 * h);
            // upright sub-triangle
            for q in &base {
                pts.push(TriPoint {
                    xi: x0 + h * q.xi,
                    eta: y0 + h * q.eta,
                    weight: q.weight * scale,
                });
            }
            // inverted sub-triangle (x0+h, y0+h) - ...
            if i + j + 1 < m {
                for q in &base {
                    pts.push(TriPoint {
                        xi: x0 + h - h * q.xi,
                        eta: y0 + h - h * q.eta,
                        weight: q.weight * scale,
                    });
                }
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let gl = GaussLegendre::new(n);
            for k in 0..(2 * n) {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let got = gl.integrate(-1.0, 1.0, |x| x.powi(k as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} k={k} got={got}");
            }
        }
    }

    #[test]
    fn triangle_rule_monomials() {
        // ∫_T ξ^a η^b = a! b! / (a + b + 2)!
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        let rule = triangle_rule(5);
        for a in 0..5u32 {
            for b in 0..(5 - a) {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let got: f64 = rule
                    .iter()
                    .map(|q| q.weight * q.xi.powi(a as i32) * q.eta.powi(b as i32))
                    .sum();
                assert!((got - exact).abs() < 1e-14, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn subdivided_rule_covers_triangle() {
        for m in 1..5 {
            let rule = subdivided_triangle_rule(3, m);
            let area: f64 = rule.iter().map(|q| q.weight).sum();
            assert!((area - 0.5).abs() < 1e-14);
            let mx: f64 = rule.iter().map(|q| q.weight * q.xi).sum();
            assert!((mx - 1.0 / 6.0).abs() < 1e-14);
            assert!(rule.iter().all(|q| q.xi >= 0.0 && q.eta >= 0.0 && q.xi + q.eta <= 1.0 + 1e-14));
        }
    }
}
