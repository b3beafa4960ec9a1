//! Velocity and pressure recovery from the discrete stream function.
//!
//! The velocity is the L2-type projection of `ntilde x grad_G(psi_h)` onto
//! the (componentwise) scalar space of degree `k_u`, stabilized by the
//! normal-derivative volume form. The pressure solves a surface Poisson
//! problem of degree `k_p` whose load is driven by the curl of the stream
//! function and the force data, with a mean-value constraint.

use crate::assembly::{
    assemble_mass, assemble_mean_vector, assemble_stabilization, assemble_stiffness,
};
use crate::fem::{build_dofmap, eval_basis, DofMap};
use crate::levelset::Geometry;
use crate::linalg::{
    build_bordered, solve_symmetric, solve_symmetric_hinted, BlockEntry, CsrMatrix, DirectHint,
};
use crate::stream::StreamSolution;
use crate::{Result, Vec3};

/// Parameters of the recovery solves.
#[derive(Debug, Clone, Copy)]
pub struct ReconstructParams {
    /// Velocity component degree.
    pub ku: usize,
    /// Pressure degree.
    pub kp: usize,
    /// Degree of the normal used in the curl: 2 selects the improved
    /// (quadratic interpolant) normal, 1 the facet normal.
    pub kg: usize,
    /// Velocity stabilization parameter.
    pub rho_u: f64,
    /// Pressure stabilization parameter.
    pub rho_p: f64,
    /// Relative residual tolerance of the linear solves.
    pub tol: f64,
    /// Iteration cap as a multiple of the system dimension.
    pub max_iter_factor: usize,
}

impl ReconstructParams {
    pub fn standard(h: f64) -> Self {
        Self { ku: 1, kp: 1, kg: 2, rho_u: h, rho_p: h, tol: 1e-10, max_iter_factor: 20 }
    }
}

/// Componentwise velocity recovery.
pub struct VelocitySolution {
    pub dofmap: DofMap,
    /// Coefficients of the three Cartesian components.
    pub components: [Vec<f64>; 3],
    pub iterations: usize,
    pub residual: f64,
}

impl VelocitySolution {
    /// Velocity at `point` inside active tet position `pos`.
    pub fn eval(&self, geom: &Geometry, pos: usize, point: Vec3) -> Result<Vec3> {
        Ok(Vec3::new(
            self.dofmap.eval(&geom.mesh, &self.components[0], pos, point)?,
            self.dofmap.eval(&geom.mesh, &self.components[1], pos, point)?,
            self.dofmap.eval(&geom.mesh, &self.components[2], pos, point)?,
        ))
    }
}

/// Mean-constrained pressure recovery.
pub struct PressureSolution {
    pub dofmap: DofMap,
    pub p: Vec<f64>,
    pub multiplier: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn tangential(g: Vec3, n: Vec3) -> Vec3 {
    g - n.dot(&g) * n
}

/// Discrete curl of the stream function at a quadrature point of `patch`
/// position `pos`: `n x P_h grad(psi_h)` with `n` the facet normal for
/// `kg = 1` and the improved normal otherwise.
fn stream_curl(
    geom: &Geometry,
    stream: &StreamSolution,
    kg: usize,
    pos: usize,
    q: usize,
) -> Result<Vec3> {
    let patch = &geom.patches[pos];
    let (x, _) = patch.quad[q];
    let grad = stream.dofmap.eval_gradient(&geom.mesh, &stream.psi, pos, x)?;
    let n = if kg == 1 { patch.n_h } else { patch.ntilde_h[q] };
    Ok(n.cross(&tangential(grad, patch.n_h)))
}

/// Recover the velocity from the stream solution.
pub fn reconstruct_velocity(
    geom: &Geometry,
    stream: &StreamSolution,
    params: &ReconstructParams,
) -> Result<VelocitySolution> {
    let dofmap = build_dofmap(&geom.mesh, &geom.active, params.ku);
    let mass = assemble_mass(&dofmap, geom).mat;
    let stab = assemble_stabilization(&dofmap, geom, params.rho_u)?.mat;
    let n = dofmap.n_dofs;
    let mut triplets = Vec::with_capacity(mass.nnz() + stab.nnz());
    for m in [&mass, &stab] {
        for r in 0..m.n_rows {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                triplets.push((r, m.col_idx[k], m.values[k]));
            }
        }
    }
    let sys = CsrMatrix::from_triplets(n, n, &mut triplets);

    let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(patch.tet_id);
        let dofs = &dofmap.tet_dofs[pos];
        for (q, &(x, w)) in patch.quad.iter().enumerate() {
            let basis = eval_basis(&verts, dofmap.order, x);
            let curl = stream_curl(geom, stream, params.kg, pos, q)?;
            for (loc, &g) in dofs.iter().enumerate() {
                for c in 0..3 {
                    rhs[c][g] += w * curl[c] * basis.values[loc];
                }
            }
        }
    }

    let max_iter = params.max_iter_factor * n;
    let mut components: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut iterations = 0;
    let mut residual = 0.0f64;
    for c in 0..3 {
        let info = solve_symmetric(&sys, &rhs[c], params.tol, max_iter)?;
        iterations += info.iterations;
        residual = residual.max(info.residual);
        components[c] = info.x;
    }
    Ok(VelocitySolution { dofmap, components, iterations, residual })
}

/// Recover the pressure from the stream solution and the force data.
pub fn reconstruct_pressure<F, K>(
    geom: &Geometry,
    stream: &StreamSolution,
    params: &ReconstructParams,
    force: F,
    curvature: K,
) -> Result<PressureSolution>
where
    F: Fn(Vec3) -> Vec3,
    K: Fn(Vec3) -> f64,
{
    let dofmap = build_dofmap(&geom.mesh, &geom.active, params.kp);
    let stiffness = assemble_stiffness(&dofmap, geom).mat;
    let stab = assemble_stabilization(&dofmap, geom, params.rho_p)?.mat;
    let mean = assemble_mean_vector(&dofmap, geom);
    let n = dofmap.n_dofs;

    let mut rhs = vec![0.0; n];
    for (pos, patch) in geom.patches.iter().enumerate() {
        let verts = geom.mesh.tet_vertices(patch.tet_id);
        let dofs = &dofmap.tet_dofs[pos];
        for (q, &(x, w)) in patch.quad.iter().enumerate() {
            let basis = eval_basis(&verts, dofmap.order, x);
            let curl = stream_curl(geom, stream, 1, pos, q)?;
            let z = curvature(x) * curl + force(x);
            for (loc, &g) in dofs.iter().enumerate() {
                rhs[g] += w * z.dot(&tangential(basis.gradients[loc], patch.n_h));
            }
        }
    }

    let (sys, full_rhs) = build_bordered(
        &[n],
        &[
            BlockEntry { row: 0, col: 0, mat: &stiffness, scale: 1.0 },
            BlockEntry { row: 0, col: 0, mat: &stab, scale: 1.0 },
        ],
        &[(0, &mean)],
        &[&rhs],
    )?;
    // pin one well-weighted dof so the direct path sees a definite leading
    // block (the stiffness kernel of constants is fixed by the constraint)
    let pin = mean
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i);
    let hint = DirectHint { order: None, pin };
    let info = solve_symmetric_hinted(
        &sys,
        &full_rhs,
        params.tol,
        params.max_iter_factor * sys.n_rows,
        &hint,
    )?;
    Ok(PressureSolution {
        dofmap,
        p: info.x[0..n].to_vec(),
        multiplier: info.x[n],
        iterations: info.iterations,
        residual: info.residual,
    })
}
