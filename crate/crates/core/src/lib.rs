//! Trace finite element solver for the surface Stokes problem in
//! stream-function formulation.
//!
//! The surface is given implicitly as the zero level of a level-set
//! function. A structured tetrahedral background lattice is generated near
//! the surface, the discrete surface is extracted as the zero level of the
//! piecewise-linear level-set interpolant, and the coupled
//! stream-function/vorticity system is discretized with trace finite
//! elements plus volume normal-derivative stabilization. Velocity and
//! pressure are reconstructed from the stream function in separate solves.
//!
//! The `study` module drives the unit-sphere convergence benchmark.

pub mod assembly;
pub mod exact;
pub mod fem;
pub mod levelset;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod reconstruct;
pub mod stream;
pub mod study;

pub use exact::{Dual, ExactFields};
pub use fem::DofMap;
pub use levelset::{Geometry, LevelSet, SurfacePatch};
pub use linalg::CsrMatrix;
pub use mesh::{BackgroundMesh, Tet};
pub use reconstruct::{PressureSolution, ReconstructParams, VelocitySolution};
pub use stream::{StreamParams, StreamSolution};
pub use study::{Preset, RhoSpec, StudyConfig, StudyRow, Variant};

/// Ambient 3D vector / point type used throughout.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Errors produced by mesh generation, geometry extraction and solves.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("level set does not intersect the bounding box: empty mesh")]
    EmptyMesh,
    #[error("estimated tet count {estimate} exceeds cap {cap}")]
    MeshTooLarge { estimate: usize, cap: usize },
    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },
    #[error("direct factorization broke down at pivot {0}")]
    PivotBreakdown(usize),
    #[error("{stage} failed at level {level}: {source}")]
    Stage {
        stage: &'static str,
        level: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
