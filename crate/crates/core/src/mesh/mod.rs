//! Unstructured triangle meshes of geometric order `p_geo`.
//!
//! Element node lists follow the local ordering of
//! [`LagrangeTriangle`](crate::lagrange::LagrangeTriangle): three vertices,
//! `p_geo − 1` nodes per edge, then interior nodes.

mod distmesh;
mod elevate;
mod locate;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use distmesh::{generate_mesh, DistMeshOptions, SizeFunction};
pub use elevate::elevate_order;
pub use locate::{Located, PointLocator};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Point};
use crate::lagrange::LagrangeTriangle;
use crate::quadrature::{triangle_rule, GaussLegendre};

/// One element edge lying on the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub element: usize,
    pub local_edge: usize,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    /// Flattened connectivity, `nodes_per_element` entries per element.
    pub connectivity: Vec<usize>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub p_geo: usize,
}

impl Mesh {
    pub fn nodes_per_element(&self) -> usize {
        (self.p_geo + 1) * (self.p_geo + 2) / 2
    }

    pub fn n_elements(&self) -> usize {
        self.connectivity.len() / self.nodes_per_element()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.nodes_per_element();
        &self.connectivity[e * k..(e + 1) * k]
    }

    pub fn element_nodes(&self, e: usize) -> impl Iterator<Item = Point> + '_ {
        self.element(e).iter().map(|&i| self.nodes[i])
    }

    pub fn vertices(&self, e: usize) -> [usize; 3] {
        let el = self.element(e);
        [el[0], el[1], el[2]]
    }

    pub fn basis(&self) -> LagrangeTriangle {
        LagrangeTriangle::new(self.p_geo)
    }

    /// Physical position and Jacobian `∂x/∂(ξ, η)` (column-major: `[[dx/dξ,
    /// dy/dξ], [dx/dη, dy/dη]]`) at a reference point.
    pub fn map(&self, basis: &LagrangeTriangle, e: usize, xi: f64, eta: f64) -> (Point, [[f64; 2]; 2]) {
        let n = basis.len();
        let mut val = [0.0; 28];
        let mut grad = [[0.0; 2]; 28];
        basis.eval_with_grad(xi, eta, &mut val[..n], &mut grad[..n]);
        let mut x = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for (a, &node) in self.element(e).iter().enumerate() {
            let p = self.nodes[node];
            for d in 0..2 {
                x[d] += val[a] * p[d];
                jac[0][d] += grad[a][0] * p[d];
                jac[1][d] += grad[a][1] * p[d];
            }
        }
        (x, jac)
    }

    /// Sorted vertex pair → list of (element, local edge).
    pub fn edge_map(&self) -> HashMap<(usize, usize), Vec<(usize, usize)>> {
        let mut map: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for e in 0..self.n_elements() {
            let v = self.vertices(e);
            for le in 0..3 {
                let (a, b) = (v[le], v[(le + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push((e, le));
            }
        }
        map
    }

    /// Edges used by exactly one element.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .edge_map()
            .into_values()
            .filter(|v| v.len() == 1)
            .map(|v| v[0])
            .collect();
        out.sort_unstable();
        out
    }

    /// Global node ids on the edge of a boundary face, ordered along the
    /// element's local edge direction.
    pub fn face_nodes(&self, face: &BoundaryFace) -> Vec<usize> {
        let basis = self.basis();
        let el = self.element(face.element);
        basis.edge_nodes(face.local_edge).into_iter().map(|a| el[a]).collect()
    }

    /// Radius ratio `2 r_in / r_circ` of the straight triangle through the
    /// element's vertices (1 for equilateral).
    pub fn quality(&self, e: usize) -> f64 {
        let [a, b, c] = self.vertices(e).map(|i| self.nodes[i]);
        radius_ratio(a, b, c)
    }

    pub fn min_quality(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.quality(e)).fold(f64::INFINITY, f64::min)
    }

    /// Area by quadrature of the (possibly curved) elements.
    pub fn area(&self) -> f64 {
        let basis = self.basis();
        let rule = triangle_rule(6);
        (0..self.n_elements())
            .map(|e| {
                rule.iter()
                    .map(|q| {
                        let (_, j) = self.map(&basis, e, q.xi, q.eta);
                        q.weight * det(j)
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Total length of boundary faces carrying `tag` (curved faces integrated).
    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        let basis = self.basis();
        let gl = GaussLegendre::new(8);
        self.boundary_faces
            .iter()
            .filter(|f| f.tag == tag)
            .map(|f| {
                gl.on_interval(0.0, 1.0)
                    .map(|(t, w)| {
                        let [xi, eta] = LagrangeTriangle::edge_point(f.local_edge, t);
                        let (_, j) = self.map(&basis, f.element, xi, eta);
                        let d = LagrangeTriangle::edge_direction(f.local_edge);
                        let dx = j[0][0] * d[0] + j[1][0] * d[1];
                        let dy = j[0][1] * d[0] + j[1][1] * d[1];
                        w * (dx * dx + dy * dy).sqrt()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Minimum Jacobian determinant per element over a quadrature rule plus
    /// the element's nodes.
    pub fn min_jacobian(&self, e: usize) -> f64 {
        let basis = self.basis();
        let rule = triangle_rule(6);
        let mut m = f64::INFINITY;
        for q in &rule {
            m = m.min(det(self.map(&basis, e, q.xi, q.eta).1));
        }
        for a in 0..basis.len() {
            let [xi, eta] = basis.node(a);
            m = m.min(det(self.map(&basis, e, xi, eta).1));
        }
        m
    }

    pub fn check_jacobians(&self) -> Result<()> {
        for e in 0..self.n_elements() {
            let d = self.min_jacobian(e);
            if d <= 0.0 || d.is_nan() {
                return Err(Error::InvertedElement { element: e, det: d });
            }
        }
        Ok(())
    }

    /// Serializes to the plain-text mesh format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "wss-mesh 1").unwrap();
        writeln!(
            s,
            "{} {} {} {}",
            self.n_nodes(),
            self.n_elements(),
            self.p_geo,
            self.boundary_faces.len()
        )
        .unwrap();
        writeln!(s, "nodes").unwrap();
        for p in &self.nodes {
            writeln!(s, "{:.16e} {:.16e}", p[0], p[1]).unwrap();
        }
        writeln!(s, "elements").unwrap();
        for e in 0..self.n_elements() {
            let line: Vec<String> = self.element(e).iter().map(|i| i.to_string()).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        writeln!(s, "boundary").unwrap();
        for f in &self.boundary_faces {
            writeln!(s, "{} {} {}", f.element, f.local_edge, f.tag).unwrap();
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let magic = lines.next().ok_or("empty mesh file")?;
        if magic != "wss-mesh 1" {
            return Err(format!("unrecognised header {magic:?}"));
        }
        let counts: Vec<usize> = lines
            .next()
            .ok_or("missing counts")?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        let [n_nodes, n_elem, p_geo, n_bnd] = counts[..] else {
            return Err("counts line needs four integers".into());
        };
        if !(1..=6).contains(&p_geo) {
            return Err(format!("unsupported geometric order {p_geo}"));
        }
        let expect = |lines: &mut dyn Iterator<Item = &str>, word: &str| -> std::result::Result<(), String> {
            match lines.next() {
                Some(l) if l == word => Ok(()),
                other => Err(format!("expected section {word:?}, found {other:?}")),
            }
        };
        expect(&mut lines, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let l = lines.next().ok_or("truncated node block")?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| e.to_string()))
                .collect::<std::result::Result<_, _>>()?;
            if v.len() != 2 {
                return Err(format!("bad node line {l:?}"));
            }
            nodes.push([v[0], v[1]]);
        }
        expect(&mut lines, "elements")?;
        let npe = (p_geo + 1) * (p_geo + 2) / 2;
        let mut connectivity = Vec::with_capacity(n_elem * npe);
        for _ in 0..n_elem {
            let l = lines.next().ok_or("truncated element block")?;
            let before = connectivity.len();
            for t in l.split_whitespace() {
                let i: usize = t.parse().map_err(|e: std::num::ParseIntError| e.to_string())?;
                if i >= n_nodes {
                    return Err(format!("node index {i} out of range"));
                }
                connectivity.push(i);
            }
            if connectivity.len() - before != npe {
                return Err(format!("element line {l:?} needs {npe} nodes"));
            }
        }
        expect(&mut lines, "boundary")?;
        let mut boundary_faces = Vec::with_capacity(n_bnd);
        for _ in 0..n_bnd {
            let l = lines.next().ok_or("truncated boundary block")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(format!("bad boundary line {l:?}"));
            }
            let element: usize = f[0].parse().map_err(|_| format!("bad element in {l:?}"))?;
            let local_edge: usize = f[1].parse().map_err(|_| format!("bad edge in {l:?}"))?;
            let tag = BoundaryTag::parse(f[2]).ok_or_else(|| format!("bad tag in {l:?}"))?;
            if element >= n_elem || local_edge > 2 {
                return Err(format!("boundary face {l:?} out of range"));
            }
            boundary_faces.push(BoundaryFace {
                element,
                local_edge,
                tag,
            });
        }
        Ok(Mesh {
            nodes,
            connectivity,
            boundary_faces,
            p_geo,
        })
    }
}

pub fn det(j: [[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[1][0] * j[0][1]
}

pub fn radius_ratio(a: Point, b: Point, c: Point) -> f64 {
    let la = dist(b, c);
    let lb = dist(c, a);
    let lc = dist(a, b);
    let num = (lb + lc - la) * (lc + la - lb) * (la + lb - lc);
    let q = num / (la * lb * lc);
    if q.is_finite() {
        q
    } else {
        0.0
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            connectivity: vec![0, 1, 2, 0, 2, 3],
            boundary_faces: vec![
                BoundaryFace { element: 0, local_edge: 0, tag: BoundaryTag::Wall },
                BoundaryFace { element: 0, local_edge: 1, tag: BoundaryTag::Outflow },
                BoundaryFace { element: 1, local_edge: 1, tag: BoundaryTag::Wall },
                BoundaryFace { element: 1, local_edge: 2, tag: BoundaryTag::Inflow },
            ],
            p_geo: 1,
        }
    }

    #[test]
    fn quality_of_equilateral_and_right_triangles() {
        let q = radius_ratio([0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]);
        assert!((q - 1.0).abs() < 1e-14);
        let q = radius_ratio([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        assert!((q - 0.828_427_124_746_190_1).abs() < 1e-14);
    }

    #[test]
    fn area_boundary_and_topology() {
        let m = unit_square();
        assert!((m.area() - 1.0).abs() < 1e-14);
        assert!((m.boundary_length(BoundaryTag::Wall) - 2.0).abs() < 1e-14);
        assert_eq!(m.boundary_edges().len(), 4);
        m.check_jacobians().unwrap();
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let mut m = unit_square();
        m.nodes[2] = [1.0 / 3.0, std::f64::consts::PI];
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(Mesh::from_text("").is_err());
        assert!(Mesh::from_text("wss-mesh 1\n1 0 1 0\nnodes\n0.0\nelements\nboundary\n").is_err());
        let m = unit_square().to_text().replace("wall", "floor");
        assert!(Mesh::from_text(&m).is_err());
    }
}
