//! Assembly of the discrete bilinear forms and load functionals.
//!
//! Surface forms are integrated over the cut polygons (patch quadrature);
//! the normal-derivative stabilization is a volume integral over the full
//! active tets. Element loops scatter local dense blocks into a triplet
//! list which is sorted and compressed, so results are deterministic.

use crate::fem::{eval_basis, DofMap};
use crate::levelset::Geometry;
use crate::linalg::CsrMatrix;
use crate::quadrature::tet_rule;
use crate::{Result, Vec3};

/// Which bilinear form a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormTag {
    /// Surface mass.
    M,
    /// Surface stiffness (tangential gradients).
    B,
    /// Curvature-weighted stiffness `2 (1 - K)`.
    BK,
    /// Volume normal-derivative stabilization.
    S,
}

pub struct FormMatrix {
    pub tag: FormTag,
    pub mat: CsrMatrix,
}

/// Degree of the volume rule used for the stabilization form.
pub const STAB_VOLUME_DEGREE: usize = 4;

fn check_alignment(dofmap: &DofMap, geom: &Geometry) {
    assert_eq!(
        dofmap.active, geom.active,
        "dofmap and geometry built from different active meshes"
    );
}

/// Generic surface form: local matrices from a per-quadrature-point kernel
/// on basis values/gradients.
fn assemble_surface<K>(dofmap: &DofMap, geom: &Geometry, kernel: K) -> CsrMatrix
where
    K: Fn(&[f64], &[Vec3], Vec3, Vec3, &mut dyn FnMut(usize, usize, f64)),
{
    check_alignment(dofmap, geom);
    let n = dofmap.n_dofs;
    let nd = dofmap.dofs_per_tet();
    let mut triplets = Vec::with_capacity(geom.patches.len() * nd * nd);
    let mut local = vec![0.0; nd * nd];
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(patch.tet_id);
        local.iter_mut().for_each(|v| *v = 0.0);
        for &(x, w) in &patch.quad {
            let basis = eval_basis(&verts, dofmap.order, x);
            kernel(&basis.values, &basis.gradients, patch.n_h, x, &mut |i, j, v| {
                local[i * nd + j] += w * v;
            });
        }
        let dofs = &dofmap.tet_dofs[pos];
        for i in 0..nd {
            for j in 0..nd {
                triplets.push((dofs[i], dofs[j], local[i * nd + j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &mut triplets)
}

fn tangential(grad: Vec3, n: Vec3) -> Vec3 {
    grad - n.dot(&grad) * n
}

/// Surface mass matrix `m_h`.
pub fn assemble_mass(dofmap: &DofMap, geom: &Geometry) -> FormMatrix {
    let mat = assemble_surface(dofmap, geom, |vals, _grads, _n, _x, acc| {
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                acc(i, j, vals[i] * vals[j]);
            }
        }
    });
    FormMatrix { tag: FormTag::M, mat }
}

/// Surface stiffness matrix `b_h` with tangentially projected gradients.
pub fn assemble_stiffness(dofmap: &DofMap, geom: &Geometry) -> FormMatrix {
    let mat = assemble_surface(dofmap, geom, |vals, grads, n, _x, acc| {
        let tg: Vec<Vec3> = grads.iter().map(|&g| tangential(g, n)).collect();
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                acc(i, j, tg[i].dot(&tg[j]));
            }
        }
    });
    FormMatrix { tag: FormTag::B, mat }
}

/// Curvature-coupling matrix `b_{h,K}`: stiffness weighted by `2 (1 - K_h)`.
pub fn assemble_bk<F: Fn(Vec3) -> f64>(
    dofmap: &DofMap,
    geom: &Geometry,
    curvature: F,
) -> FormMatrix {
    let mat = assemble_surface(dofmap, geom, |vals, grads, n, x, acc| {
        let weight = 2.0 * (1.0 - curvature(x));
        let tg: Vec<Vec3> = grads.iter().map(|&g| tangential(g, n)).collect();
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                acc(i, j, weight * tg[i].dot(&tg[j]));
            }
        }
    });
    FormMatrix { tag: FormTag::BK, mat }
}

/// Volume normal-derivative stabilization `s_h` over the full active tets.
pub fn assemble_stabilization(dofmap: &DofMap, geom: &Geometry, rho: f64) -> Result<FormMatrix> {
    check_alignment(dofmap, geom);
    assert!(rho >= 0.0, "stabilization parameter must be nonnegative");
    let n = dofmap.n_dofs;
    let nd = dofmap.dofs_per_tet();
    let rule = tet_rule(STAB_VOLUME_DEGREE)?;
    let mut triplets = Vec::with_capacity(geom.patches.len() * nd * nd);
    let mut local = vec![0.0; nd * nd];
    if rho > 0.0 {
        for (pos, patch) in geom.patches.iter().enumerate() {
            let verts = geom.mesh.tet_vertices(patch.tet_id);
            let jac = nalgebra::Matrix3::from_columns(&[
                verts[1] - verts[0],
                verts[2] - verts[0],
                verts[3] - verts[0],
            ]);
            let detj = jac.determinant().abs();
            let n_h = patch.n_h;
            local.iter_mut().for_each(|v| *v = 0.0);
            for node in &rule {
                let x = verts[0] + jac * node.point;
                let basis = eval_basis(&verts, dofmap.order, x);
                let dn: Vec<f64> = basis.gradients.iter().map(|g| n_h.dot(g)).collect();
                let w = rho * node.weight * detj;
                for i in 0..nd {
                    for j in 0..nd {
                        local[i * nd + j] += w * dn[i] * dn[j];
                    }
                }
            }
            let dofs = &dofmap.tet_dofs[pos];
            for i in 0..nd {
                for j in 0..nd {
                    triplets.push((dofs[i], dofs[j], local[i * nd + j]));
                }
            }
        }
    }
    Ok(FormMatrix {
        tag: FormTag::S,
        mat: CsrMatrix::from_triplets(n, n, &mut triplets),
    })
}

/// Load functional `g(xi) = -2 ∫ f_h . curl_G(xi)` with
/// `curl_G(xi) = n_h x P_h grad(xi)`.
pub fn assemble_rhs_g<F: Fn(Vec3) -> Vec3>(dofmap: &DofMap, geom: &Geometry, f: F) -> Vec<f64> {
    check_alignment(dofmap, geom);
    let mut rhs = vec![0.0; dofmap.n_dofs];
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(patch.tet_id);
        let dofs = &dofmap.tet_dofs[pos];
        for &(x, w) in &patch.quad {
            let basis = eval_basis(&verts, dofmap.order, x);
            let fx = f(x);
            for (loc, &g) in dofs.iter().enumerate() {
                let curl = patch.n_h.cross(&tangential(basis.gradients[loc], patch.n_h));
                rhs[g] += -2.0 * w * fx.dot(&curl);
            }
        }
    }
    rhs
}

/// Mean-value constraint vector: `c[i] = ∫ phi_i ds_h`.
pub fn assemble_mean_vector(dofmap: &DofMap, geom: &Geometry) -> Vec<f64> {
    check_alignment(dofmap, geom);
    let mut c = vec![0.0; dofmap.n_dofs];
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(patch.tet_id);
        let dofs = &dofmap.tet_dofs[pos];
        for &(x, w) in &patch.quad {
            let basis = eval_basis(&verts, dofmap.order, x);
            for (loc, &g) in dofs.iter().enumerate() {
                c[g] += w * basis.values[loc];
            }
        }
    }
    c
}

/// Surface functional with a vector density dotted against projected basis
/// gradients: `rhs[i] = ∫ z(x) . P_h grad(phi_i) ds_h`. The density may use
/// the per-point improved normal via its second argument.
pub fn assemble_gradient_functional<F>(dofmap: &DofMap, geom: &Geometry, z: F) -> Vec<f64>
where
    F: Fn(Vec3, Vec3) -> Vec3, // (point, ntilde at point) -> density
{
    check_alignment(dofmap, geom);
    let mut rhs = vec![0.0; dofmap.n_dofs];
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(patch.tet_id);
        let dofs = &dofmap.tet_dofs[pos];
        for (q, &(x, w)) in patch.quad.iter().enumerate() {
            let basis = eval_basis(&verts, dofmap.order, x);
            let zx = z(x, patch.ntilde_h[q]);
            for (loc, &g) in dofs.iter().enumerate() {
                rhs[g] += w * zx.dot(&tangential(basis.gradients[loc], patch.n_h));
            }
        }
    }
    rhs
}

/// Surface functional with a scalar density against basis values:
/// `rhs[i] = ∫ s(x) phi_i ds_h`, where the density sees the quadrature
/// point and the per-point improved normal.
pub fn assemble_value_functional<F>(dofmap: &DofMap, geom: &Geometry, s: F) -> Vec<f64>
where
    F: Fn(Vec3, Vec3) -> f64,
{
    check_alignment(dofmap, geom);
    let mut rhs = vec![0.0; dofmap.n_dofs];
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(patch.tet_id);
        let dofs = &dofmap.tet_dofs[pos];
        for (q, &(x, w)) in patch.quad.iter().enumerate() {
            let basis = eval_basis(&verts, dofmap.order, x);
            let sx = s(x, patch.ntilde_h[q]);
            for (loc, &g) in dofs.iter().enumerate() {
                rhs[g] += w * sx * basis.values[loc];
            }
        }
    }
    rhs
}
