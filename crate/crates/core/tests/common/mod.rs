//! Helpers shared by the integration tests: a tiny planar cut geometry, an
//! independent high-degree quadrature oracle for the assembled surface
//! forms, and a finite-difference oracle for the manufactured force field.
#![allow(dead_code)]

use surface_stokes::assembly::{assemble_mass, assemble_stiffness};
use surface_stokes::fem::{build_dofmap, eval_basis, DofMap};
use surface_stokes::mesh::build_lattice;
use surface_stokes::quadrature::gauss_legendre_unit;
use surface_stokes::{CsrMatrix, ExactFields, Geometry, LevelSet, Vec3};

/// A handful of active tets: one lattice cube cut by a tilted plane.
pub fn plane_geometry() -> Geometry {
    let levelset = LevelSet::plane(Vec3::new(0.3, 0.4, 1.0), 0.23);
    let phi = levelset.value.clone();
    let mesh = build_lattice(
        move |p| phi(p),
        0.5,
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(0.5, 0.5, 0.5),
    )
    .expect("lattice");
    Geometry::from_mesh(mesh, levelset, 0, 5).expect("geometry")
}

/// Integrate `f` over the cut polygons of `geom` with a tensor Gauss rule
/// (Duffy transform, 10 points per direction) that is independent of the
/// surface quadrature stored in the patches.
pub fn duffy_integrate<F: FnMut(usize, Vec3) -> f64>(geom: &Geometry, mut f: F) -> f64 {
    let gl = gauss_legendre_unit(10);
    let mut total = 0.0;
    for (pos, patch) in geom.patches.iter().enumerate() {
        for tri in &patch.triangles {
            let (a, b, c) = (
                patch.polygon[tri[0]],
                patch.polygon[tri[1]],
                patch.polygon[tri[2]],
            );
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            for &(s, ws) in &gl {
                for &(t, wt) in &gl {
                    let (l1, l2) = (s, t * (1.0 - s));
                    let p = l1 * a + l2 * b + (1.0 - l1 - l2) * c;
                    total += ws * wt * (1.0 - s) * 2.0 * area * f(pos, p);
                }
            }
        }
    }
    total
}

/// Maximum absolute entry-wise deviation, relative to the largest entry,
/// between the assembled mass/stiffness matrices and a dense rebuild from
/// the independent Duffy quadrature.
pub fn assembly_oracle_errors(geom: &Geometry, k: usize) -> (f64, f64) {
    let dofmap = build_dofmap(&geom.mesh, &geom.active, k);
    let n = dofmap.n_dofs;
    let mass = assemble_mass(&dofmap, geom).mat;
    let stiff = assemble_stiffness(&dofmap, geom).mat;

    let mut mass_oracle = vec![0.0; n * n];
    let mut stiff_oracle = vec![0.0; n * n];
    let gl = gauss_legendre_unit(10);
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(geom.active[pos]);
        let dofs = &dofmap.tet_dofs[pos];
        let nrm = patch.n_h;
        for tri in &patch.triangles {
            let (a, b, c) = (
                patch.polygon[tri[0]],
                patch.polygon[tri[1]],
                patch.polygon[tri[2]],
            );
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            for &(s, ws) in &gl {
                for &(t, wt) in &gl {
                    let (l1, l2) = (s, t * (1.0 - s));
                    let p = l1 * a + l2 * b + (1.0 - l1 - l2) * c;
                    let w = ws * wt * (1.0 - s) * 2.0 * area;
                    let basis = eval_basis(&verts, k, p);
                    let tang: Vec<Vec3> = basis
                        .gradients
                        .iter()
                        .map(|g| g - g.dot(&nrm) * nrm)
                        .collect();
                    for (i, &gi) in dofs.iter().enumerate() {
                        for (j, &gj) in dofs.iter().enumerate() {
                            mass_oracle[gi * n + gj] += w * basis.values[i] * basis.values[j];
                            stiff_oracle[gi * n + gj] += w * tang[i].dot(&tang[j]);
                        }
                    }
                }
            }
        }
    }

    let rel_err = |mat: &CsrMatrix, oracle: &[f64]| {
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut err = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                err = err.max((mat.get(r, c) - oracle[r * n + c]).abs());
            }
        }
        err / scale
    };
    (rel_err(&mass, &mass_oracle), rel_err(&stiff, &stiff_oracle))
}

/// Finite-difference oracle for the force: evaluates
/// `-P div_G(E_s(u)) + u + grad_G p` directly from second-order central
/// differences of the degree-0 homogeneous extensions.
pub fn force_fd_oracle(x: Vec3) -> Vec3 {
    let ex = ExactFields;
    let x = x.normalize();
    let n = x;
    let proj = nalgebra::Matrix3::identity() - n * n.transpose();
    let eps = 1e-5;

    let es_ext = |y: Vec3| ex.rate_of_strain(y.normalize());
    let p_ext = |y: Vec3| ex.pressure(y.normalize());

    let mut div = Vec3::zeros();
    let mut grad_p = Vec3::zeros();
    for j in 0..3 {
        let mut dy = Vec3::zeros();
        dy[j] = eps;
        let dt = (es_ext(x + dy) - es_ext(x - dy)) / (2.0 * eps);
        for i in 0..3 {
            div[i] += dt[(i, j)];
        }
        grad_p[j] = (p_ext(x + dy) - p_ext(x - dy)) / (2.0 * eps);
    }
    -proj * div + ex.u(x) + proj * grad_p
}

/// Sum of sparse matrices with identical shape.
pub fn csr_sum(mats: &[&CsrMatrix]) -> CsrMatrix {
    let (nr, nc) = (mats[0].n_rows, mats[0].n_cols);
    let mut triplets = Vec::new();
    for m in mats {
        assert_eq!((m.n_rows, m.n_cols), (nr, nc));
        for r in 0..nr {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                triplets.push((r, m.col_idx[k], m.values[k]));
            }
        }
    }
    CsrMatrix::from_triplets(nr, nc, &mut triplets)
}

/// Deterministic low-discrepancy-ish sphere points for oracle sampling.
pub fn sphere_points(count: usize) -> Vec<Vec3> {
    (0..count)
        .map(|i| {
            let z = -1.0 + 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let a = 2.4 * i as f64;
            Vec3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

/// Build the P1 dof map of a geometry (shorthand used by several tests).
pub fn p1_dofmap(geom: &Geometry) -> DofMap {
    build_dofmap(&geom.mesh, &geom.active, 1)
}
