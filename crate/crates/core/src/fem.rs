//! Lagrange P1/P2 spaces on the active mesh: basis evaluation and
//! degree-of-freedom management.

use std::collections::HashMap;

use crate::mesh::{BackgroundMesh, TET_EDGES};
use crate::{Error, Result, Vec3};

/// Barycentric coordinates of `point` with respect to the tet `verts`.
pub fn barycentric(verts: &[Vec3; 4], point: Vec3) -> [f64; 4] {
    let m = nalgebra::Matrix3::from_columns(&[
        verts[1] - verts[0],
        verts[2] - verts[0],
        verts[3] - verts[0],
    ]);
    let rhs = point - verts[0];
    let sol = m.lu().solve(&rhs).expect("degenerate tet");
    [1.0 - sol.x - sol.y - sol.z, sol.x, sol.y, sol.z]
}

/// Constant ambient gradients of the four barycentric coordinates.
pub fn lambda_gradients(verts: &[Vec3; 4]) -> [Vec3; 4] {
    let m = nalgebra::Matrix3::from_columns(&[
        verts[1] - verts[0],
        verts[2] - verts[0],
        verts[3] - verts[0],
    ]);
    let inv = m.try_inverse().expect("degenerate tet");
    // rows of the inverse are the gradients of lambda_1..3
    let g1 = Vec3::new(inv[(0, 0)], inv[(0, 1)], inv[(0, 2)]);
    let g2 = Vec3::new(inv[(1, 0)], inv[(1, 1)], inv[(1, 2)]);
    let g3 = Vec3::new(inv[(2, 0)], inv[(2, 1)], inv[(2, 2)]);
    [-(g1 + g2 + g3), g1, g2, g3]
}

/// Values and ambient gradients of the local Lagrange shape functions at one
/// point. Local ordering: 4 vertex functions, then (for P2) 6 edge functions
/// in `TET_EDGES` order.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec3>,
}

/// Evaluate the degree-`k` Lagrange basis of a tet at `point`.
pub fn eval_basis(verts: &[Vec3; 4], k: usize, point: Vec3) -> BasisEval {
    assert!(k == 1 || k == 2, "only P1 and P2 are supported");
    let lam = barycentric(verts, point);
    let grads = lambda_gradients(verts);
    match k {
        1 => BasisEval {
            values: lam.to_vec(),
            gradients: grads.to_vec(),
        },
        _ => {
            let mut values = Vec::with_capacity(10);
            let mut gradients = Vec::with_capacity(10);
            for i in 0..4 {
                values.push(lam[i] * (2.0 * lam[i] - 1.0));
                gradients.push((4.0 * lam[i] - 1.0) * grads[i]);
            }
            for [a, b] in TET_EDGES {
                values.push(4.0 * lam[a] * lam[b]);
                gradients.push(4.0 * (lam[b] * grads[a] + lam[a] * grads[b]));
            }
            BasisEval { values, gradients }
        }
    }
}

/// Degree-of-freedom numbering of `V_{h,k}` over the active tets.
pub struct DofMap {
    pub order: usize,
    pub n_dofs: usize,
    /// Active tet ids, defining the local ordering used everywhere below.
    pub active: Vec<usize>,
    /// Per active tet: local-to-global dof map (4 entries for P1, 10 for P2).
    pub tet_dofs: Vec<Vec<usize>>,
}

/// Contiguous global numbering covering exactly the vertices (and edges, for
/// P2) of the active tets.
pub fn build_dofmap(mesh: &BackgroundMesh, active: &[usize], k: usize) -> DofMap {
    assert!(k == 1 || k == 2);
    assert!(!active.is_empty(), "active set is empty");
    let mut vertex_map: HashMap<usize, usize> = HashMap::new();
    let mut edge_map: HashMap<usize, usize> = HashMap::new();
    let mut n_vertex = 0usize;
    for &t in active {
        for &v in &mesh.tets[t].verts {
            vertex_map.entry(v).or_insert_with(|| {
                n_vertex += 1;
                n_vertex - 1
            });
        }
    }
    let mut n_edge = 0usize;
    if k == 2 {
        for &t in active {
            for &e in &mesh.tet_edges[t] {
                edge_map.entry(e).or_insert_with(|| {
                    n_edge += 1;
                    n_edge - 1
                });
            }
        }
    }
    let tet_dofs = active
        .iter()
        .map(|&t| {
            let mut dofs: Vec<usize> =
                mesh.tets[t].verts.iter().map(|v| vertex_map[v]).collect();
            if k == 2 {
                dofs.extend(mesh.tet_edges[t].iter().map(|e| n_vertex + edge_map[e]));
            }
            dofs
        })
        .collect();
    DofMap {
        order: k,
        n_dofs: n_vertex + n_edge,
        active: active.to_vec(),
        tet_dofs,
    }
}

impl DofMap {
    pub fn dofs_per_tet(&self) -> usize {
        if self.order == 1 {
            4
        } else {
            10
        }
    }

    /// Nodal interpolation of a closed-form scalar field.
    pub fn interpolate<F: Fn(Vec3) -> f64>(&self, mesh: &BackgroundMesh, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for (pos, &t) in self.active.iter().enumerate() {
            let verts = mesh.tet_vertices(t);
            for (loc, &g) in self.tet_dofs[pos].iter().enumerate() {
                let p = if loc < 4 {
                    verts[loc]
                } else {
                    let [a, b] = TET_EDGES[loc - 4];
                    0.5 * (verts[a] + verts[b])
                };
                out[g] = f(p);
            }
        }
        out
    }

    /// Value of the FE function `coeffs` at `point` inside active tet
    /// position `pos`.
    pub fn eval(
        &self,
        mesh: &BackgroundMesh,
        coeffs: &[f64],
        pos: usize,
        point: Vec3,
    ) -> Result<f64> {
        if coeffs.len() != self.n_dofs {
            return Err(Error::DimensionMismatch("FE coefficient vector".into()));
        }
        let verts = mesh.tet_vertices(self.active[pos]);
        let basis = eval_basis(&verts, self.order, point);
        Ok(self.tet_dofs[pos]
            .iter()
            .zip(&basis.values)
            .map(|(&g, v)| coeffs[g] * v)
            .sum())
    }

    /// Ambient gradient of the FE function `coeffs` at `point` inside active
    /// tet position `pos`.
    pub fn eval_gradient(
        &self,
        mesh: &BackgroundMesh,
        coeffs: &[f64],
        pos: usize,
        point: Vec3,
    ) -> Result<Vec3> {
        if coeffs.len() != self.n_dofs {
            return Err(Error::DimensionMismatch("FE coefficient vector".into()));
        }
        let verts = mesh.tet_vertices(self.active[pos]);
        let basis = eval_basis(&verts, self.order, point);
        Ok(self.tet_dofs[pos]
            .iter()
            .zip(&basis.gradients)
            .map(|(&g, gr)| coeffs[g] * gr)
            .sum())
    }
}
