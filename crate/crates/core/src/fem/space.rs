use std::collections::HashMap;
use std::sync::Arc;

use faer::sparse::linalg::solvers::SymbolicLu;
use faer::sparse::SymbolicSparseColMatRef;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Geometry};
use crate::lagrange::LagrangeTriangle;
use crate::mesh::{det, Mesh, PointLocator};
use crate::quadrature::triangle_rule;

/// Velocity nodes per element (P3).
pub(crate) const NV: usize = 10;
/// Pressure nodes per element (P2).
pub(crate) const NP: usize = 6;
/// Local unknowns per element: two velocity components then pressure.
pub(crate) const NL: usize = 2 * NV + NP;

pub(crate) const QUAD_POINTS_1D: usize = 6;

/// Degree-of-freedom layout, boundary data and cached element geometry for
/// the P3/P2 discretization on one mesh.
///
/// Unknowns are blocked as `[u1 (n_nodes), u2 (n_nodes), p (n_pressure)]`.
#[derive(Debug)]
pub struct FlowSpace {
    pub mesh: Arc<Mesh>,
    pub geometry: Geometry,
    pub(crate) locator: PointLocator,
    pub(crate) n_pressure: usize,
    /// Pressure dofs per element in P2 local order.
    pub(crate) p_conn: Vec<usize>,
    /// Pressure dof of each mesh node that carries one.
    pub(crate) node_pressure: Vec<Option<usize>>,
    /// Strongly imposed dofs with their value at θ = 1.
    pub(crate) dirichlet: Vec<(usize, f64)>,
    pub(crate) is_dirichlet: Vec<bool>,
    pub(crate) n_q: usize,
    /// Reference P3 values per quadrature point.
    pub(crate) phi: Vec<[f64; NV]>,
    /// Reference P2 values per quadrature point.
    pub(crate) psi: Vec<[f64; NP]>,
    /// Quadrature weight × |J| per (element, point).
    pub(crate) wdet: Vec<f64>,
    /// Physical P3 gradients per (element, point).
    pub(crate) grad: Vec<[[f64; 2]; NV]>,
    pub(crate) col_ptr: Vec<usize>,
    pub(crate) row_idx: Vec<usize>,
    /// Value slot for each local (row, col) pair per element, `usize::MAX`
    /// where the row is strongly imposed.
    pub(crate) slots: Vec<usize>,
    /// Value slot of the diagonal entry of each Dirichlet row.
    pub(crate) dirichlet_diag: Vec<usize>,
    pub(crate) symbolic: SymbolicLu<usize>,
}

impl FlowSpace {
    pub fn new(mesh: Arc<Mesh>, geometry: Geometry) -> Result<Self> {
        if mesh.p_geo != 3 {
            return Err(Error::InvalidArgument(format!(
                "the P3/P2 discretization needs a cubic mesh, got p_geo = {}",
                mesh.p_geo
            )));
        }
        let nn = mesh.n_nodes();
        let ne = mesh.n_elements();

        // P2 pressure: mesh vertices plus one dof per edge
        let mut node_pressure: Vec<Option<usize>> = vec![None; nn];
        let mut edge_pressure: HashMap<(usize, usize), usize> = HashMap::new();
        let mut n_pressure = 0;
        let mut p_conn = Vec::with_capacity(ne * NP);
        for e in 0..ne {
            let v = mesh.vertices(e);
            for &k in &v {
                if node_pressure[k].is_none() {
                    node_pressure[k] = Some(n_pressure);
                    n_pressure += 1;
                }
                p_conn.push(node_pressure[k].unwrap());
            }
            for le in 0..3 {
                let (a, b) = (v[le], v[(le + 1) % 3]);
                let id = *edge_pressure.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    n_pressure += 1;
                    n_pressure - 1
                });
                p_conn.push(id);
            }
        }

        // strong boundary data; wall beats inflow at shared corners
        let n = 2 * nn + n_pressure;
        let mut value = vec![None::<[f64; 2]>; nn];
        let mut on_wall = vec![false; nn];
        for f in &mesh.boundary_faces {
            for k in mesh.face_nodes(f) {
                match f.tag {
                    BoundaryTag::Inflow => {
                        value[k] = Some(geometry.inflow_velocity(mesh.nodes[k], 1.0));
                    }
                    BoundaryTag::Wall => on_wall[k] = true,
                    BoundaryTag::Outflow => {}
                }
            }
        }
        let mut dirichlet = Vec::new();
        let mut is_dirichlet = vec![false; n];
        for k in 0..nn {
            let g = if on_wall[k] {
                [0.0, 0.0]
            } else if let Some(g) = value[k] {
                g
            } else {
                continue;
            };
            dirichlet.push((k, g[0]));
            dirichlet.push((nn + k, g[1]));
            is_dirichlet[k] = true;
            is_dirichlet[nn + k] = true;
        }
        dirichlet.sort_unstable_by_key(|d| d.0);

        let (n_q, phi, psi, wdet, grad) = element_cache(&mesh)?;

        // sparsity: element couplings, Dirichlet rows reduced to the diagonal
        let local_dofs = |e: usize| -> [usize; NL] {
            let el = mesh.element(e);
            std::array::from_fn(|a| {
                if a < NV {
                    el[a]
                } else if a < 2 * NV {
                    nn + el[a - NV]
                } else {
                    2 * nn + p_conn[e * NP + a - 2 * NV]
                }
            })
        };
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in 0..ne {
            let dofs = local_dofs(e);
            for &c in &dofs {
                for &r in &dofs {
                    if !is_dirichlet[r] {
                        cols[c].push(r);
                    }
                }
            }
        }
        for (r, &d) in is_dirichlet.iter().enumerate() {
            if d {
                cols[r].push(r);
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        drop(cols);
        let slot = |r: usize, c: usize| -> usize {
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            col_ptr[c] + rows.binary_search(&r).expect("entry missing from sparsity pattern")
        };
        let mut slots = Vec::with_capacity(ne * NL * NL);
        for e in 0..ne {
            let dofs = local_dofs(e);
            for &r in &dofs {
                for &c in &dofs {
                    slots.push(if is_dirichlet[r] { usize::MAX } else { slot(r, c) });
                }
            }
        }
        let dirichlet_diag = dirichlet.iter().map(|&(k, _)| slot(k, k)).collect();

        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLu::try_new(sym).map_err(|e| Error::Factorization(format!("{e:?}")))?;

        Ok(Self {
            locator: PointLocator::new(&mesh),
            mesh,
            geometry,
            n_pressure,
            p_conn,
            node_pressure,
            dirichlet,
            is_dirichlet,
            n_q,
            phi,
            psi,
            wdet,
            grad,
            col_ptr,
            row_idx,
            slots,
            dirichlet_diag,
            symbolic,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn n_pressure(&self) -> usize {
        self.n_pressure
    }

    /// Total number of unknowns.
    pub fn n_dofs(&self) -> usize {
        2 * self.mesh.n_nodes() + self.n_pressure
    }

    /// Global dofs of element `e` in local order.
    pub(crate) fn local_dofs(&self, e: usize) -> [usize; NL] {
        let nn = self.mesh.n_nodes();
        let el = self.mesh.element(e);
        std::array::from_fn(|a| {
            if a < NV {
                el[a]
            } else if a < 2 * NV {
                nn + el[a - NV]
            } else {
                2 * nn + self.p_conn[e * NP + a - 2 * NV]
            }
        })
    }

    /// Indices of strongly imposed unknowns and their values at θ = 1.
    pub fn dirichlet(&self) -> &[(usize, f64)] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.is_dirichlet[dof]
    }

    /// State vector with the boundary data for `theta` and zeros elsewhere.
    pub fn lifted_zero(&self, theta: f64) -> Vec<f64> {
        let mut u = vec![0.0; self.n_dofs()];
        self.impose(&mut u, theta);
        u
    }

    pub(crate) fn impose(&self, u: &mut [f64], theta: f64) {
        for &(k, g) in &self.dirichlet {
            u[k] = theta * g;
        }
    }

    /// Pressure dof at mesh vertex `k`.
    pub fn vertex_pressure_dof(&self, k: usize) -> Option<usize> {
        self.node_pressure[k]
    }
}

type Cache = (usize, Vec<[f64; NV]>, Vec<[f64; NP]>, Vec<f64>, Vec<[[f64; 2]; NV]>);

fn element_cache(mesh: &Mesh) -> Result<Cache> {
    let rule = triangle_rule(QUAD_POINTS_1D);
    let n_q = rule.len();
    let p3 = LagrangeTriangle::new(3);
    let p2 = LagrangeTriangle::new(2);
    let mut phi = Vec::with_capacity(n_q);
    let mut dphi = Vec::with_capacity(n_q);
    let mut psi = Vec::with_capacity(n_q);
    for q in &rule {
        let mut v = [0.0; NV];
        let mut g = [[0.0; 2]; NV];
        p3.eval_with_grad(q.xi, q.eta, &mut v, &mut g);
        phi.push(v);
        dphi.push(g);
        let mut s = [0.0; NP];
        p2.eval(q.xi, q.eta, &mut s);
        psi.push(s);
    }
    let ne = mesh.n_elements();
    let mut wdet = Vec::with_capacity(ne * n_q);
    let mut grad = Vec::with_capacity(ne * n_q);
    for e in 0..ne {
        let el = mesh.element(e);
        for (qi, q) in rule.iter().enumerate() {
            let mut j = [[0.0; 2]; 2];
            for (a, &k) in el.iter().enumerate() {
                let p = mesh.nodes[k];
                for d in 0..2 {
                    j[0][d] += dphi[qi][a][0] * p[d];
                    j[1][d] += dphi[qi][a][1] * p[d];
                }
            }
            let dj = det(j);
            if dj <= 0.0 {
                return Err(Error::InvertedElement { element: e, det: dj });
            }
            wdet.push(q.weight * dj);
            grad.push(physical_gradients(&dphi[qi], j, dj));
        }
    }
    Ok((n_q, phi, psi, wdet, grad))
}

/// Maps reference gradients through the inverse of `j` (`j[r][d] = ∂x_d/∂ξ_r`).
pub(crate) fn physical_gradients<const N: usize>(
    dref: &[[f64; 2]; N],
    j: [[f64; 2]; 2],
    dj: f64,
) -> [[f64; 2]; N] {
    std::array::from_fn(|a| {
        let [gx, ge] = dref[a];
        [
            (j[1][1] * gx - j[0][1] * ge) / dj,
            (-j[1][0] * gx + j[0][0] * ge) / dj,
        ]
    })
}
