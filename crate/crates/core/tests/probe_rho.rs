use std::time::Instant;
use surface_stokes::reconstruct::{reconstruct_velocity, ReconstructParams};
use surface_stokes::{ExactFields, Geometry, LevelSet};
use surface_stokes::stream::{solve_stream, StreamParams};
use surface_stokes::study::velocity_error_norms;

#[test]
#[ignore]
fn probe_jitter_rho_sweep() {
    let ex = ExactFields;
    for level in 1..=4 {
        let t = Instant::now();
        let geom = Geometry::build_perturbed(&LevelSet::sphere(), level, 0.25).unwrap();
        let h = geom.h;
        let sp = StreamParams { k: 2, rho: h, tol: 1e-10, max_iter_factor: 40 };
        let stream = solve_stream(&geom, &sp, |x| ex.force(x), |_| 1.0).unwrap();
        eprintln!("level {level}: geom+stream {:.1}s", t.elapsed().as_secs_f64());
        for (name, rho_u) in [("rho_u=h", h), ("rho_u=0", 0.0)] {
            let t = Instant::now();
            let rp = ReconstructParams {
                ku: 1,
                kp: 1,
                kg: 2,
                rho_u,
                rho_p: h,
                tol: 1e-10,
                max_iter_factor: 4,
            };
            match reconstruct_velocity(&geom, &stream, &rp) {
                Ok(vel) => {
                    let (u_m, u_h1) = velocity_error_norms(&geom, &vel, rho_u).unwrap();
                    eprintln!(
                        "level {level} {name}: u_m {u_m:.4e}  u_h1 {u_h1:.4e}  ({:.1}s)",
                        t.elapsed().as_secs_f64()
                    );
                }
                Err(e) => eprintln!(
                    "level {level} {name}: FAILED {e:?} ({:.1}s)",
                    t.elapsed().as_secs_f64()
                ),
            }
        }
    }
}
