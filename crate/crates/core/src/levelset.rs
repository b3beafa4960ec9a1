//! Level-set representation and extraction of the discrete surface.
//!
//! The discrete surface is the zero level of the piecewise-linear
//! interpolant of the level-set function on the background lattice. Each
//! active tet contributes one planar polygon (triangle or quadrilateral)
//! carrying surface quadrature points, the piecewise-constant normal `n_h`
//! (gradient of the P1 interpolant) and the improved normal `ntilde_h`
//! (gradient of the P2 interpolant, sampled per quadrature point).

use std::io::Write;
use std::sync::Arc;

use crate::fem::{barycentric, lambda_gradients};
use crate::mesh::{self, BackgroundMesh, TET_EDGES, ZERO_PERTURBATION};
use crate::quadrature::triangle_rule;
use crate::{Error, Result, Vec3};

type ScalarField = Arc<dyn Fn(Vec3) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>;

/// Closed-form level-set function with analytic gradient and closest-point
/// projection.
#[derive(Clone)]
pub struct LevelSet {
    pub value: ScalarField,
    pub gradient: VectorField,
    pub closest_point: VectorField,
}

impl LevelSet {
    pub fn new(value: ScalarField, gradient: VectorField, closest_point: VectorField) -> Self {
        Self { value, gradient, closest_point }
    }

    /// Unit sphere, `phi(x) = |x| - 1`.
    pub fn sphere() -> Self {
        Self {
            value: Arc::new(|p: Vec3| p.norm() - 1.0),
            gradient: Arc::new(|p: Vec3| p / p.norm()),
            closest_point: Arc::new(|p: Vec3| p / p.norm()),
        }
    }

    /// Affine level set `phi(x) = n . x - c`.
    pub fn plane(normal: Vec3, offset: f64) -> Self {
        let n = normal.normalize();
        Self {
            value: Arc::new(move |p: Vec3| n.dot(&p) - offset),
            gradient: Arc::new(move |_| n),
            closest_point: Arc::new(move |p: Vec3| p - (n.dot(&p) - offset) * n),
        }
    }

    pub fn eval(&self, p: Vec3) -> f64 {
        (self.value)(p)
    }
}

/// Cut polygon and surface quadrature of one active tet.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub tet_id: usize,
    /// 3 or 4 vertices on tet edges, ordered as a simple polygon.
    pub polygon: Vec<Vec3>,
    /// Triangulation of the polygon (indices into `polygon`).
    pub triangles: Vec<[usize; 3]>,
    /// Physical quadrature points and weights (weights sum to polygon area).
    pub quad: Vec<(Vec3, f64)>,
    /// Piecewise-constant discrete normal of the tet.
    pub n_h: Vec3,
    /// Improved (P2-interpolant) normal at each quadrature point.
    pub ntilde_h: Vec<Vec3>,
}

impl SurfacePatch {
    pub fn area(&self) -> f64 {
        self.quad.iter().map(|&(_, w)| w).sum()
    }
}

/// Zero-level polygon of the P1 interpolant on one tet. Returns `None` when
/// the cut is empty or has zero 2-measure. Vertices of a quadrilateral cut
/// are ordered to form a simple polygon.
pub fn cut_tet(verts: &[Vec3; 4], phi_values: &[f64; 4], h: f64) -> Option<Vec<Vec3>> {
    let eps = ZERO_PERTURBATION * h;
    let vals: Vec<f64> = phi_values.iter().map(|&v| if v == 0.0 { eps } else { v }).collect();
    let neg: Vec<usize> = (0..4).filter(|&i| vals[i] < 0.0).collect();
    let pos: Vec<usize> = (0..4).filter(|&i| vals[i] > 0.0).collect();
    if neg.is_empty() || pos.is_empty() {
        return None;
    }
    let crossing = |a: usize, b: usize| {
        let t = vals[a] / (vals[a] - vals[b]);
        verts[a] + t * (verts[b] - verts[a])
    };
    match neg.len() {
        1 => Some(pos.iter().map(|&p| crossing(neg[0], p)).collect()),
        3 => Some(neg.iter().map(|&q| crossing(q, pos[0])).collect()),
        2 => {
            let (a, b) = (neg[0], neg[1]);
            let (c, d) = (pos[0], pos[1]);
            // adjacent crossings share a tet face: ac-ad-bd-bc is simple
            Some(vec![crossing(a, c), crossing(a, d), crossing(b, d), crossing(b, c)])
        }
        _ => unreachable!(),
    }
}

/// Split the cut polygon into triangles; quadrilaterals split along the
/// shorter diagonal.
pub fn triangulate(polygon: &[Vec3]) -> Vec<[usize; 3]> {
    match polygon.len() {
        3 => vec![[0, 1, 2]],
        4 => {
            let d02 = (polygon[0] - polygon[2]).norm();
            let d13 = (polygon[1] - polygon[3]).norm();
            if d02 <= d13 {
                vec![[0, 1, 2], [0, 2, 3]]
            } else {
                vec![[1, 2, 3], [1, 3, 0]]
            }
        }
        n => panic!("cut polygon with {n} vertices"),
    }
}

/// Gradient of the P1 interpolant on a tet, i.e. the (unnormalized) discrete
/// normal direction.
pub fn p1_gradient(verts: &[Vec3; 4], phi_values: &[f64; 4]) -> Vec3 {
    let grads = lambda_gradients(verts);
    (0..4).map(|i| phi_values[i] * grads[i]).sum()
}

/// Piecewise-constant discrete normal `n_h` on a tet.
pub fn discrete_normal(verts: &[Vec3; 4], phi_values: &[f64; 4]) -> Result<Vec3> {
    let g = p1_gradient(verts, phi_values);
    let norm = g.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "vanishing P1 level-set gradient".into(),
        ));
    }
    Ok(g / norm)
}

/// Gradient of the quadratic (P2) interpolant of the level set on a tet,
/// evaluated at `point`. Nodal data: values at the 4 vertices and at the 6
/// edge midpoints.
pub fn p2_gradient(
    verts: &[Vec3; 4],
    vertex_values: &[f64; 4],
    edge_values: &[f64; 6],
    point: Vec3,
) -> Vec3 {
    let lam = barycentric(verts, point);
    let grads = lambda_gradients(verts);
    let mut g = Vec3::zeros();
    for i in 0..4 {
        g += vertex_values[i] * (4.0 * lam[i] - 1.0) * grads[i];
    }
    for (e, [a, b]) in TET_EDGES.iter().enumerate() {
        g += edge_values[e] * 4.0 * (lam[*b] * grads[*a] + lam[*a] * grads[*b]);
    }
    g
}

/// Improved normal `ntilde_h`: normalized gradient of the P2 interpolant.
pub fn improved_normal(
    verts: &[Vec3; 4],
    vertex_values: &[f64; 4],
    edge_values: &[f64; 6],
    point: Vec3,
) -> Result<Vec3> {
    let g = p2_gradient(verts, vertex_values, edge_values, point);
    let norm = g.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "vanishing P2 level-set gradient".into(),
        ));
    }
    Ok(g / norm)
}

/// Everything the assembly needs for one refinement level: background mesh,
/// active tets, surface patches and nodal level-set data.
pub struct Geometry {
    pub mesh: BackgroundMesh,
    pub levelset: LevelSet,
    /// Tet ids of the active mesh.
    pub active: Vec<usize>,
    /// One patch per active tet, in `active` order.
    pub patches: Vec<SurfacePatch>,
    /// Nodal level-set values on all mesh vertices.
    pub nodal: Vec<f64>,
    pub h: f64,
    pub level: usize,
}

impl Geometry {
    /// Build the geometry for a refinement level on the standard box
    /// `[-2, 2]^3` with a degree-5 surface quadrature rule.
    pub fn build(levelset: &LevelSet, level: usize) -> Result<Self> {
        Self::build_with(levelset, level, 5, 50_000_000)
    }

    /// Like [`Geometry::build`], but with the lattice vertices displaced by
    /// the deterministic pseudo-random perturbation of
    /// [`mesh::perturb_vertices`]. Used to emulate an unstructured
    /// background mesh.
    pub fn build_perturbed(levelset: &LevelSet, level: usize, beta: f64) -> Result<Self> {
        let lo = Vec3::new(-2.0, -2.0, -2.0);
        let hi = Vec3::new(2.0, 2.0, 2.0);
        let phi = levelset.value.clone();
        let mut mesh = mesh::refine(move |p| phi(p), level, lo, hi, 50_000_000)?;
        mesh::perturb_vertices(&mut mesh, beta);
        Self::from_mesh(mesh, levelset.clone(), level, 5)
    }

    pub fn build_with(
        levelset: &LevelSet,
        level: usize,
        surf_degree: usize,
        tet_cap: usize,
    ) -> Result<Self> {
        let lo = Vec3::new(-2.0, -2.0, -2.0);
        let hi = Vec3::new(2.0, 2.0, 2.0);
        let phi = levelset.value.clone();
        let mesh = mesh::refine(move |p| phi(p), level, lo, hi, tet_cap)?;
        Self::from_mesh(mesh, levelset.clone(), level, surf_degree)
    }

    /// Like [`Geometry::build`], but with deterministic pseudo-random noise
    /// of magnitude `gamma * h^2` added to the nodal level-set values that
    /// define the discrete surface and its facet normal. The surface stays
    /// a second-order-accurate interface while the facet normal carries a
    /// generic first-order error, as it does when the level set is sampled
    /// on an unstructured mesh or comes from measured data; on the exact
    /// lattice the facet-normal error oscillates so regularly that its
    /// effect on projected quantities superconverges. The improved normal
    /// is built from clean samples and keeps its accuracy.
    pub fn build_noisy(levelset: &LevelSet, level: usize, gamma: f64) -> Result<Self> {
        let lo = Vec3::new(-2.0, -2.0, -2.0);
        let hi = Vec3::new(2.0, 2.0, 2.0);
        let phi = levelset.value.clone();
        let mesh = mesh::refine(move |p| phi(p), level, lo, hi, 50_000_000)?;
        Self::from_mesh_noisy(mesh, levelset.clone(), level, 5, gamma)
    }

    pub fn from_mesh(
        mesh: BackgroundMesh,
        levelset: LevelSet,
        level: usize,
        surf_degree: usize,
    ) -> Result<Self> {
        Self::from_mesh_noisy(mesh, levelset, level, surf_degree, 0.0)
    }

    pub fn from_mesh_noisy(
        mesh: BackgroundMesh,
        levelset: LevelSet,
        level: usize,
        surf_degree: usize,
        gamma: f64,
    ) -> Result<Self> {
        let mut nodal = mesh.nodal_values(|p| levelset.eval(p));
        if gamma != 0.0 {
            let amp = gamma * mesh.h * mesh.h;
            for (v, xi) in nodal.iter_mut().zip(mesh::nodal_noise(&mesh)) {
                *v += amp * xi;
            }
        }
        let active = mesh::active_mesh(&mesh, &nodal);
        if active.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let rule = triangle_rule(surf_degree)?;
        let h = mesh.h;

        let mut patches = Vec::with_capacity(active.len());
        for &tet_id in &active {
            let verts = mesh.tet_vertices(tet_id);
            let tet = &mesh.tets[tet_id];
            let vals = [
                nodal[tet.verts[0]],
                nodal[tet.verts[1]],
                nodal[tet.verts[2]],
                nodal[tet.verts[3]],
            ];
            let polygon = cut_tet(&verts, &vals, h).ok_or_else(|| {
                Error::DegenerateGeometry(format!("active tet {tet_id} has empty cut"))
            })?;
            let triangles = triangulate(&polygon);
            let n_h = discrete_normal(&verts, &vals)?;

            let mut quad = Vec::new();
            for tri in &triangles {
                let (a, b, c) = (polygon[tri[0]], polygon[tri[1]], polygon[tri[2]]);
                let area = 0.5 * (b - a).cross(&(c - a)).norm();
                for node in &rule {
                    let p = node.bary[0] * a + node.bary[1] * b + node.bary[2] * c;
                    quad.push((p, node.weight * area));
                }
            }

            // P2 nodal data: clean analytic level-set samples at the
            // vertices and edge midpoints (nodal noise must not degrade
            // the improved normal)
            let clean_vals = [
                levelset.eval(verts[0]),
                levelset.eval(verts[1]),
                levelset.eval(verts[2]),
                levelset.eval(verts[3]),
            ];
            let mut edge_vals = [0.0; 6];
            for (e, [i, j]) in TET_EDGES.iter().enumerate() {
                edge_vals[e] = levelset.eval(0.5 * (verts[*i] + verts[*j]));
            }
            let ntilde_h = quad
                .iter()
                .map(|&(p, _)| improved_normal(&verts, &clean_vals, &edge_vals, p))
                .collect::<Result<Vec<_>>>()?;

            patches.push(SurfacePatch {
                tet_id,
                polygon,
                triangles,
                quad,
                n_h,
                ntilde_h,
            });
        }

        Ok(Self {
            mesh,
            levelset,
            active,
            patches,
            nodal,
            h,
            level,
        })
    }

    /// Total area of the discrete surface.
    pub fn surface_area(&self) -> f64 {
        self.patches.iter().map(|p| p.area()).sum()
    }

    /// OBJ dump of the discrete surface triangles.
    pub fn dump_obj<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut offset = 1usize;
        for patch in &self.patches {
            for v in &patch.polygon {
                writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
            }
            for t in &patch.triangles {
                writeln!(out, "f {} {} {}", offset + t[0], offset + t[1], offset + t[2])?;
            }
            offset += patch.polygon.len();
        }
        Ok(())
    }
}
