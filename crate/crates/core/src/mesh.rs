//! Near-surface tetrahedral background lattice.
//!
//! The bounding box is partitioned conceptually into cubes of side `h`, each
//! split into 6 tetrahedra by the Kuhn (Freudenthal) subdivision. Only cubes
//! near the zero level set are materialized. The subdivision pattern is
//! translation-invariant, so faces of neighboring cubes match and the shape
//! regularity constant is the same on every refinement level.

use std::collections::HashMap;
use std::io::Write;

use crate::{Error, Result, Vec3};

/// Relative perturbation applied to exactly-zero nodal level-set values
/// before sign classification (scaled by `h`).
pub const ZERO_PERTURBATION: f64 = 1e-10;

/// One tetrahedron of the background lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tet {
    pub verts: [usize; 4],
    /// Lattice coordinates of the cube this tet was carved from.
    pub parent_cube: [i64; 3],
}

/// Local vertex pairs of the 6 tet edges, in the order used for P2 dofs.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<Tet>,
    /// Unique undirected edges (sorted vertex pairs).
    pub edges: Vec<[usize; 2]>,
    /// Per-tet global edge ids, ordered as `TET_EDGES`.
    pub tet_edges: Vec<[usize; 6]>,
    pub h: f64,
    pub box_min: Vec3,
    pub box_max: Vec3,
}

/// The six Kuhn tets of the unit cube: vertex paths from corner 0 to corner 7
/// along one axis permutation each.
const KUHN_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn perm_parity(p: &[usize; 3]) -> bool {
    // true = even
    matches!(p, [0, 1, 2] | [1, 2, 0] | [2, 0, 1])
}

/// Generate the near-surface lattice: a cube is kept if the level set
/// changes sign on its corners or if some corner lies within `sqrt(3) h` of
/// the zero level (measured in level-set values).
pub fn build_lattice<F>(levelset: F, h: f64, box_min: Vec3, box_max: Vec3) -> Result<BackgroundMesh>
where
    F: Fn(Vec3) -> f64,
{
    assert!(h > 0.0, "mesh size must be positive");
    let n = [
        ((box_max.x - box_min.x) / h).ceil() as i64,
        ((box_max.y - box_min.y) / h).ceil() as i64,
        ((box_max.z - box_min.z) / h).ceil() as i64,
    ];
    let point = |i: i64, j: i64, k: i64| {
        Vec3::new(
            box_min.x + h * i as f64,
            box_min.y + h * j as f64,
            box_min.z + h * k as f64,
        )
    };

    // Level-set values on the full corner grid.
    let stride_j = (n[2] + 1) as usize;
    let stride_i = ((n[1] + 1) as usize) * stride_j;
    let mut grid = vec![0.0f64; ((n[0] + 1) as usize) * stride_i];
    for i in 0..=n[0] {
        for j in 0..=n[1] {
            for k in 0..=n[2] {
                grid[i as usize * stride_i + j as usize * stride_j + k as usize] =
                    levelset(point(i, j, k));
            }
        }
    }
    let grid_val = |i: i64, j: i64, k: i64| -> f64 {
        grid[i as usize * stride_i + j as usize * stride_j + k as usize]
    };

    let band = 3.0f64.sqrt() * h;
    let mut vertex_ids: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut tets = Vec::new();

    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let mut min_v = f64::INFINITY;
                let mut max_v = f64::NEG_INFINITY;
                let mut min_abs = f64::INFINITY;
                for c in 0..8u32 {
                    let v = grid_val(
                        i + ((c >> 2) & 1) as i64,
                        j + ((c >> 1) & 1) as i64,
                        k + (c & 1) as i64,
                    );
                    let v = if v == 0.0 { ZERO_PERTURBATION * h } else { v };
                    min_v = min_v.min(v);
                    max_v = max_v.max(v);
                    min_abs = min_abs.min(v.abs());
                }
                let keep = (min_v < 0.0 && max_v > 0.0) || min_abs <= band;
                if !keep {
                    continue;
                }

                // corner global ids, indexed by (di, dj, dk) bits
                let mut corner = [0usize; 8];
                for (c, slot) in corner.iter_mut().enumerate() {
                    let (di, dj, dk) = ((c >> 2) & 1, (c >> 1) & 1, c & 1);
                    let key = (i + di as i64, j + dj as i64, k + dk as i64);
                    *slot = *vertex_ids.entry(key).or_insert_with(|| {
                        vertices.push(point(key.0, key.1, key.2));
                        vertices.len() - 1
                    });
                }
                let bit = |axis: usize| -> usize { [4, 2, 1][axis] };
                for perm in &KUHN_PERMS {
                    let c0 = 0usize;
                    let c1 = c0 | bit(perm[0]);
                    let c2 = c1 | bit(perm[1]);
                    let c3 = 7usize;
                    let mut verts = [corner[c0], corner[c1], corner[c2], corner[c3]];
                    if !perm_parity(perm) {
                        verts.swap(1, 2);
                    }
                    tets.push(Tet { verts, parent_cube: [i, j, k] });
                }
            }
        }
    }

    if tets.is_empty() {
        return Err(Error::EmptyMesh);
    }

    // unique edge table
    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut tet_edges = Vec::with_capacity(tets.len());
    for tet in &tets {
        let mut ids = [0usize; 6];
        for (e, [a, b]) in TET_EDGES.iter().enumerate() {
            let (lo, hi) = {
                let (x, y) = (tet.verts[*a], tet.verts[*b]);
                (x.min(y), x.max(y))
            };
            ids[e] = *edge_ids.entry((lo, hi)).or_insert_with(|| {
                edges.push([lo, hi]);
                edges.len() - 1
            });
        }
        tet_edges.push(ids);
    }

    Ok(BackgroundMesh {
        vertices,
        tets,
        edges,
        tet_edges,
        h,
        box_min,
        box_max,
    })
}

impl BackgroundMesh {
    pub fn tet_vertices(&self, tet_id: usize) -> [Vec3; 4] {
        let t = &self.tets[tet_id];
        [
            self.vertices[t.verts[0]],
            self.vertices[t.verts[1]],
            self.vertices[t.verts[2]],
            self.vertices[t.verts[3]],
        ]
    }

    pub fn tet_volume(&self, tet_id: usize) -> f64 {
        let v = self.tet_vertices(tet_id);
        (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])) / 6.0
    }

    /// Nodal values of a level-set function on all mesh vertices.
    pub fn nodal_values<F: Fn(Vec3) -> f64>(&self, f: F) -> Vec<f64> {
        self.vertices.iter().map(|&p| f(p)).collect()
    }

    /// OFF-format dump of the given tets (each as 4 triangular faces).
    pub fn dump_off<W: Write>(&self, tet_ids: &[usize], out: &mut W) -> Result<()> {
        writeln!(out, "OFF")?;
        writeln!(out, "{} {} 0", self.vertices.len(), 4 * tet_ids.len())?;
        for v in &self.vertices {
            writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
        }
        for &t in tet_ids {
            let v = self.tets[t].verts;
            for f in [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]] {
                writeln!(out, "3 {} {} {}", v[f[0]], v[f[1]], v[f[2]])?;
            }
        }
        Ok(())
    }
}

/// Tets on which the P1 interpolant attains both strict signs. Nodal zeros
/// are perturbed to `+eps*h`, so tangential touches (cuts of zero 2-measure)
/// are excluded.
pub fn active_mesh(mesh: &BackgroundMesh, nodal: &[f64]) -> Vec<usize> {
    assert_eq!(nodal.len(), mesh.vertices.len());
    let eps = ZERO_PERTURBATION * mesh.h;
    let mut active = Vec::new();
    for (id, tet) in mesh.tets.iter().enumerate() {
        let mut neg = false;
        let mut pos = false;
        for &v in &tet.verts {
            let val = if nodal[v] == 0.0 { eps } else { nodal[v] };
            neg |= val < 0.0;
            pos |= val > 0.0;
        }
        if neg && pos {
            active.push(id);
        }
    }
    active
}

/// Deterministically displace every lattice vertex by a pseudo-random
/// offset of at most `beta * h` per coordinate, derived by hashing the
/// vertex's lattice coordinates. This mimics an unstructured triangulation
/// (breaking the error cancellations of the symmetric Kuhn pattern) while
/// keeping runs bit-reproducible across refinement levels and processes.
/// `beta` up to about 0.25 keeps the tets shape regular.
pub fn perturb_vertices(mesh: &mut BackgroundMesh, beta: f64) {
    assert!((0.0..=0.25).contains(&beta), "perturbation out of range");
    let h = mesh.h;
    for v in &mut mesh.vertices {
        let mut state = vertex_hash(v, mesh.box_min, h, 0x2545f4914f6cdd1d);
        for c in 0..3 {
            state = splitmix64(state);
            let unit = (state >> 11) as f64 / (1u64 << 53) as f64;
            v[c] += (2.0 * unit - 1.0) * beta * h;
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn vertex_hash(v: &Vec3, box_min: Vec3, h: f64, seed: u64) -> u64 {
    let key = [
        ((v.x - box_min.x) / h).round() as i64,
        ((v.y - box_min.y) / h).round() as i64,
        ((v.z - box_min.z) / h).round() as i64,
    ];
    let mut state = seed;
    for k in key {
        state = splitmix64(state ^ k as u64);
    }
    state
}

/// One deterministic pseudo-random value in `[-1, 1]` per mesh vertex,
/// hashed from the lattice position so refinement levels are independent.
pub fn nodal_noise(mesh: &BackgroundMesh) -> Vec<f64> {
    mesh.vertices
        .iter()
        .map(|v| {
            let state = splitmix64(vertex_hash(v, mesh.box_min, mesh.h, 0x9e2077bdeadbeef1));
            2.0 * ((state >> 11) as f64 / (1u64 << 53) as f64) - 1.0
        })
        .collect()
}

/// Mesh size of refinement level `level`: `h = 0.6 * 2^(-level)`.
pub fn level_mesh_size(level: usize) -> f64 {
    0.6 * 0.5f64.powi(level as i32)
}

/// Regenerate the lattice at refinement level `level`. Guards against runs
/// whose estimated near-surface tet count exceeds `tet_cap`.
pub fn refine<F>(
    levelset: F,
    level: usize,
    box_min: Vec3,
    box_max: Vec3,
    tet_cap: usize,
) -> Result<BackgroundMesh>
where
    F: Fn(Vec3) -> f64,
{
    let h = level_mesh_size(level);
    // near-surface band is O(h) thick, so the cube count scales like the
    // surface area over h^2; use the box diameter as a crude area bound
    let width = (box_max - box_min).norm();
    let estimate = (8.0 * width * width / (h * h) * 6.0) as usize;
    if estimate > tet_cap {
        return Err(Error::MeshTooLarge { estimate, cap: tet_cap });
    }
    build_lattice(levelset, h, box_min, box_max)
}
