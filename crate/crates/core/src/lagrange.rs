//! Equispaced Lagrange bases on the reference triangle.
//!
//! Local node order: the three vertices, then `p − 1` nodes per edge
//! (edge 0: v0→v1, edge 1: v1→v2, edge 2: v2→v0, each listed from its first
//! vertex), then interior nodes.

/// Lagrange basis of order `p` on `{ξ, η ≥ 0, ξ + η ≤ 1}`.
#[derive(Debug, Clone)]
pub struct LagrangeTriangle {
    order: usize,
    /// Barycentric lattice indices `(i, j, k)` with `i + j + k = p` for the
    /// weights of `(λ0, λ1, λ2) = (1 − ξ − η, ξ, η)`.
    lattice: Vec<[usize; 3]>,
}

impl LagrangeTriangle {
    pub fn new(order: usize) -> Self {
        assert!((1..=6).contains(&order), "unsupported Lagrange order {order}");
        let p = order;
        let mut lattice = vec![[p, 0, 0], [0, p, 0], [0, 0, p]];
        for m in 1..p {
            lattice.push([p - m, m, 0]);
        }
        for m in 1..p {
            lattice.push([0, p - m, m]);
        }
        for m in 1..p {
            lattice.push([m, 0, p - m]);
        }
        for j in 1..p {
            for k in 1..p {
                if j + k < p {
                    lattice.push([p - j - k, j, k]);
                }
            }
        }
        Self { order, lattice }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Reference coordinates `(ξ, η)` of local node `a`.
    pub fn node(&self, a: usize) -> [f64; 2] {
        let p = self.order as f64;
        let [_, j, k] = self.lattice[a];
        [j as f64 / p, k as f64 / p]
    }

    /// Local node indices on edge `e`, ordered from its first vertex to its
    /// second (endpoints included).
    pub fn edge_nodes(&self, e: usize) -> Vec<usize> {
        let p = self.order;
        let (a, b) = [(0, 1), (1, 2), (2, 0)][e];
        let mut out = vec![a];
        out.extend((0..p - 1).map(|m| 3 + e * (p - 1) + m));
        out.push(b);
        out
    }

    /// Reference coordinates of the point at parameter `t ∈ [0, 1]` on edge `e`.
    pub fn edge_point(e: usize, t: f64) -> [f64; 2] {
        match e {
            0 => [t, 0.0],
            1 => [1.0 - t, t],
            _ => [0.0, 1.0 - t],
        }
    }

    /// d(ξ, η)/dt along edge `e`.
    pub fn edge_direction(e: usize) -> [f64; 2] {
        match e {
            0 => [1.0, 0.0],
            1 => [-1.0, 1.0],
            _ => [0.0, -1.0],
        }
    }

    /// Basis values at `(ξ, η)`.
    pub fn eval(&self, xi: f64, eta: f64, out: &mut [f64]) {
        let lam = [1.0 - xi - eta, xi, eta];
        for (a, idx) in self.lattice.iter().enumerate() {
            out[a] = (0..3).map(|d| self.factor(idx[d], lam[d]).0).product();
        }
    }

    /// Basis values and reference gradients `[∂/∂ξ, ∂/∂η]` at `(ξ, η)`.
    pub fn eval_with_grad(&self, xi: f64, eta: f64, val: &mut [f64], grad: &mut [[f64; 2]]) {
        let lam = [1.0 - xi - eta, xi, eta];
        for (a, idx) in self.lattice.iter().enumerate() {
            let f: [(f64, f64); 3] = std::array::from_fn(|d| self.factor(idx[d], lam[d]));
            let v = f[0].0 * f[1].0 * f[2].0;
            let dl0 = f[0].1 * f[1].0 * f[2].0;
            let dl1 = f[0].0 * f[1].1 * f[2].0;
            let dl2 = f[0].0 * f[1].0 * f[2].1;
            val[a] = v;
            grad[a] = [dl1 - dl0, dl2 - dl0];
        }
    }

    /// `L_n(λ) = Π_{m<n} (pλ − m)/(m + 1)` and its derivative in λ.
    fn factor(&self, n: usize, lam: f64) -> (f64, f64) {
        let p = self.order as f64;
        let mut v = 1.0;
        let mut d = 0.0;
        for m in 0..n {
            let num = p * lam - m as f64;
            let den = (m + 1) as f64;
            d = (d * num + v * p) / den;
            v = v * num / den;
        }
        (v, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_kronecker_property() {
        for p in 1..=4 {
            let b = LagrangeTriangle::new(p);
            assert_eq!(b.len(), (p + 1) * (p + 2) / 2);
            let mut v = vec![0.0; b.len()];
            for a in 0..b.len() {
                let [x, y] = b.node(a);
                b.eval(x, y, &mut v);
                for (c, &vc) in v.iter().enumerate() {
                    let expect = if a == c { 1.0 } else { 0.0 };
                    assert!((vc - expect).abs() < 1e-13, "p={p} a={a} c={c}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_gradient_fd() {
        let b = LagrangeTriangle::new(3);
        let n = b.len();
        let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
        let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
        for &(x, y) in &[(0.2, 0.3), (0.05, 0.9), (0.6, 0.1)] {
            b.eval_with_grad(x, y, &mut v, &mut g);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let h = 1e-6;
            for dir in 0..2 {
                let (dx, dy) = if dir == 0 { (h, 0.0) } else { (0.0, h) };
                b.eval(x + dx, y + dy, &mut vp);
                b.eval(x - dx, y - dy, &mut vm);
                for a in 0..n {
                    let fd = (vp[a] - vm[a]) / (2.0 * h);
                    assert!((fd - g[a][dir]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn edge_nodes_lie_on_edges_in_order() {
        let b = LagrangeTriangle::new(3);
        for e in 0..3 {
            let nodes = b.edge_nodes(e);
            for (m, &a) in nodes.iter().enumerate() {
                let t = m as f64 / 3.0;
                let q = LagrangeTriangle::edge_point(e, t);
                let r = b.node(a);
                assert!((q[0] - r[0]).abs() < 1e-15 && (q[1] - r[1]).abs() < 1e-15);
            }
        }
    }
}
