//! Coupled stream-function/vorticity solve.
//!
//! The discrete system pairs the vorticity mass equation with the momentum
//! equation: with `M` the surface mass matrix, `B` the surface stiffness,
//! `S` the stabilization, `BK` the curvature coupling and `c` the mean
//! constraint on the stream function,
//!
//! ```text
//! [ M      B+S    0 ] [phi]   [0]
//! [ B+S   -BK     c ] [psi] = [g]
//! [ 0      c^T    0 ] [lam]   [0]
//! ```

use crate::assembly::{
    assemble_bk, assemble_mass, assemble_mean_vector, assemble_rhs_g, assemble_stabilization,
    assemble_stiffness,
};
use crate::fem::{build_dofmap, DofMap};
use crate::levelset::Geometry;
use crate::linalg::{
    build_bordered, fill_reducing_order, solve_saddle_direct, solve_symmetric_hinted, BlockEntry,
    CsrMatrix, DirectHint,
};
use crate::{Result, Vec3};

/// Parameters of the coupled solve.
#[derive(Debug, Clone, Copy)]
pub struct StreamParams {
    /// Polynomial degree of the stream-function and vorticity space.
    pub k: usize,
    /// Stabilization parameter (absolute value, already scaled by h where
    /// desired).
    pub rho: f64,
    /// Relative residual tolerance of the linear solve.
    pub tol: f64,
    /// Iteration cap as a multiple of the system dimension.
    pub max_iter_factor: usize,
}

impl Default for StreamParams {
    fn default() -> Self {
        Self { k: 2, rho: 0.0, tol: 1e-10, max_iter_factor: 20 }
    }
}

impl StreamParams {
    pub fn standard(h: f64) -> Self {
        Self { k: 2, rho: h, ..Self::default() }
    }
}

/// Discrete stream function, vorticity and constraint multiplier, plus the
/// dof map they live on.
pub struct StreamSolution {
    pub dofmap: DofMap,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub multiplier: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Assembled forms of the coupled system, kept for residual checks and
/// error norms.
pub struct StreamForms {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub stab: CsrMatrix,
    pub bk: CsrMatrix,
    pub mean: Vec<f64>,
    pub rhs_g: Vec<f64>,
}

pub fn assemble_stream_forms<F, K>(
    dofmap: &DofMap,
    geom: &Geometry,
    rho: f64,
    force: F,
    curvature: K,
) -> Result<StreamForms>
where
    F: Fn(Vec3) -> Vec3,
    K: Fn(Vec3) -> f64,
{
    Ok(StreamForms {
        mass: assemble_mass(dofmap, geom).mat,
        stiffness: assemble_stiffness(dofmap, geom).mat,
        stab: assemble_stabilization(dofmap, geom, rho)?.mat,
        bk: assemble_bk(dofmap, geom, curvature).mat,
        mean: assemble_mean_vector(dofmap, geom),
        rhs_g: assemble_rhs_g(dofmap, geom, force),
    })
}

fn add_csr(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(a.nnz() + b.nnz());
    for m in [a, b] {
        for r in 0..m.n_rows {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                triplets.push((r, m.col_idx[k], m.values[k]));
            }
        }
    }
    CsrMatrix::from_triplets(a.n_rows, a.n_cols, &mut triplets)
}

/// Solve the coupled system for given data. `force` is the surface force
/// density (constant-normal extension), `curvature` the Gauss curvature
/// approximation `K_h`.
pub fn solve_stream<F, K>(
    geom: &Geometry,
    params: &StreamParams,
    force: F,
    curvature: K,
) -> Result<StreamSolution>
where
    F: Fn(Vec3) -> Vec3,
    K: Fn(Vec3) -> f64,
{
    let dofmap = build_dofmap(&geom.mesh, &geom.active, params.k);
    let forms = assemble_stream_forms(&dofmap, geom, params.rho, force, curvature)?;
    solve_stream_with_forms(dofmap, &forms, params)
}

pub fn solve_stream_with_forms(
    dofmap: DofMap,
    forms: &StreamForms,
    params: &StreamParams,
) -> Result<StreamSolution> {
    let n = dofmap.n_dofs;
    let bs = add_csr(&forms.stiffness, &forms.stab);
    let zero = vec![0.0; n];

    // block-pivoted direct solve over (phi_i, psi_i) pairs: the pair pivot
    // determinant is bounded below by the stabilization regardless of how
    // thin the local cuts are, which a scalar elimination cannot guarantee
    let mut neg_bk = forms.bk.clone();
    neg_bk.values.iter_mut().for_each(|v| *v = -*v);
    if let Ok(info) = solve_saddle_direct(
        &forms.mass,
        &bs,
        &neg_bk,
        &forms.mean,
        &zero,
        &forms.rhs_g,
        params.tol,
    ) {
        let phi = info.x[0..n].to_vec();
        let psi = info.x[n..2 * n].to_vec();
        let multiplier = info.x[2 * n];
        return Ok(StreamSolution {
            dofmap,
            psi,
            phi,
            multiplier,
            iterations: info.iterations,
            residual: info.residual,
        });
    }

    let (sys, rhs) = build_bordered(
        &[n, n],
        &[
            BlockEntry { row: 0, col: 0, mat: &forms.mass, scale: 1.0 },
            BlockEntry { row: 0, col: 1, mat: &bs, scale: 1.0 },
            BlockEntry { row: 1, col: 0, mat: &bs, scale: 1.0 },
            BlockEntry { row: 1, col: 1, mat: &forms.bk, scale: -1.0 },
        ],
        &[(1, &forms.mean)],
        &[&zero, &forms.rhs_g],
    )?;
    // elimination order for the direct solve: nested dissection on the
    // scalar-dof graph with each phi dof immediately before its psi
    // partner and the multiplier last, so every leading minor is a
    // nonsingular saddle subproblem; the remaining constant-mode rank-1
    // defect is lifted by pinning the most-weighted constrained dof
    let node_order = fill_reducing_order(&bs);
    let mut order = Vec::with_capacity(2 * n + 1);
    for &i in &node_order {
        order.push(i);
        order.push(i + n);
    }
    order.push(2 * n);
    let pin = forms
        .mean
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| n + i);
    let hint = DirectHint { order: Some(order), pin };
    let info =
        solve_symmetric_hinted(&sys, &rhs, params.tol, params.max_iter_factor * sys.n_rows, &hint)?;
    let phi = info.x[0..n].to_vec();
    let psi = info.x[n..2 * n].to_vec();
    let multiplier = info.x[2 * n];
    Ok(StreamSolution {
        dofmap,
        psi,
        phi,
        multiplier,
        iterations: info.iterations,
        residual: info.residual,
    })
}
