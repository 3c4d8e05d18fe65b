use std::collections::HashMap;

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Geometry, Point};
use crate::lagrange::LagrangeTriangle;

/// Raises a linear mesh to geometric order `p_geo` (1..=3).
///
/// Edge nodes are shared between neighbours and stored from the lower to the
/// higher global vertex index. Nodes on boundary faces are projected onto the
/// exact boundary; the cubic face node of a curved element is re-centred so
/// the element map stays smooth.
pub fn elevate_order(mesh: &Mesh, geometry: &Geometry, p_geo: usize) -> Result<Mesh> {
    if mesh.p_geo != 1 {
        return Err(Error::InvalidArgument(format!(
            "order elevation expects a linear mesh, got p_geo = {}",
            mesh.p_geo
        )));
    }
    if !(1..=3).contains(&p_geo) {
        return Err(Error::InvalidArgument(format!("unsupported geometric order {p_geo}")));
    }
    if p_geo == 1 {
        return Ok(mesh.clone());
    }
    let basis = LagrangeTriangle::new(p_geo);
    let npe = basis.len();
    let per_edge = p_geo - 1;

    let mut boundary_tag: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    for f in &mesh.boundary_faces {
        let v = mesh.vertices(f.element);
        let (a, b) = (v[f.local_edge], v[(f.local_edge + 1) % 3]);
        boundary_tag.insert((a.min(b), a.max(b)), f.tag);
    }

    let mut nodes: Vec<Point> = mesh.nodes.clone();
    let mut edge_nodes: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut connectivity = Vec::with_capacity(mesh.n_elements() * npe);

    for e in 0..mesh.n_elements() {
        let v = mesh.vertices(e);
        let mut local = vec![usize::MAX; npe];
        local[..3].copy_from_slice(&v);
        let mut curved = false;
        for le in 0..3 {
            let (a, b) = (v[le], v[(le + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let ids = match edge_nodes.get(&key) {
                Some(ids) => ids.clone(),
                None => {
                    let (lo, hi) = (nodes[key.0], nodes[key.1]);
                    let tag = boundary_tag.get(&key).copied();
                    let mut ids = Vec::with_capacity(per_edge);
                    for m in 1..=per_edge {
                        let t = m as f64 / p_geo as f64;
                        let mut p = [lo[0] + t * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1])];
                        if let Some(tag) = tag {
                            p = geometry.snap(p, tag)?;
                        }
                        ids.push(nodes.len());
                        nodes.push(p);
                    }
                    edge_nodes.insert(key, ids.clone());
                    ids
                }
            };
            if boundary_tag.contains_key(&key) {
                curved = true;
            }
            // stored lo → hi; the local edge runs a → b
            for m in 0..per_edge {
                let id = if a < b { ids[m] } else { ids[per_edge - 1 - m] };
                local[3 + le * per_edge + m] = id;
            }
        }
        if p_geo == 3 {
            let vsum = [0, 1, 2].iter().fold([0.0; 2], |s, &k| add(s, nodes[local[k]]));
            let esum = (3..9).fold([0.0; 2], |s, k| add(s, nodes[local[k]]));
            let p = if curved {
                // cubic blend: exact centroid for straight sides
                [esum[0] / 4.0 - vsum[0] / 6.0, esum[1] / 4.0 - vsum[1] / 6.0]
            } else {
                [vsum[0] / 3.0, vsum[1] / 3.0]
            };
            local[9] = nodes.len();
            nodes.push(p);
        }
        connectivity.extend_from_slice(&local);
    }

    let out = Mesh {
        nodes,
        connectivity,
        boundary_faces: mesh.boundary_faces.clone(),
        p_geo,
    };
    out.check_jacobians()?;
    Ok(out)
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometrySpec;
    use crate::mesh::{generate_mesh, DistMeshOptions};

    #[test]
    fn straight_channel_nodes_stay_affine() {
        let g = Geometry::Channel(GeometrySpec::straight(0.3, 0.0, 1.0));
        let lin = generate_mesh(&g, 0.1, &DistMeshOptions::default()).unwrap();
        let cubic = elevate_order(&lin, &g, 3).unwrap();
        let basis = LagrangeTriangle::new(3);
        for e in 0..cubic.n_elements() {
            let el = cubic.element(e);
            let [a, b, c] = [0, 1, 2].map(|k| cubic.nodes[el[k]]);
            for (k, &id) in el.iter().enumerate() {
                let [xi, eta] = basis.node(k);
                let expect = [
                    a[0] + xi * (b[0] - a[0]) + eta * (c[0] - a[0]),
                    a[1] + xi * (b[1] - a[1]) + eta * (c[1] - a[1]),
                ];
                let p = cubic.nodes[id];
                assert!((p[0] - expect[0]).abs() < 1e-14 && (p[1] - expect[1]).abs() < 1e-14);
            }
        }
        assert!((cubic.area() - 0.6).abs() < 1e-13);
    }

    #[test]
    fn conforming_shared_edges() {
        let g = Geometry::Channel(GeometrySpec::stenosis());
        let lin = generate_mesh(&g, 0.15, &DistMeshOptions::default()).unwrap();
        let cubic = elevate_order(&lin, &g, 3).unwrap();
        let basis = LagrangeTriangle::new(3);
        for owners in lin.edge_map().values() {
            if owners.len() != 2 {
                continue;
            }
            let (e0, l0) = owners[0];
            let (e1, l1) = owners[1];
            let n0: Vec<usize> = basis.edge_nodes(l0).iter().map(|&a| cubic.element(e0)[a]).collect();
            let mut n1: Vec<usize> = basis.edge_nodes(l1).iter().map(|&a| cubic.element(e1)[a]).collect();
            n1.reverse();
            assert_eq!(n0, n1);
        }
    }
}
