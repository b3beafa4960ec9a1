//! Acceptance gate: the full unit-sphere convergence study at levels 0-4
//! plus the solve-free property suite, with one pass/fail line per
//! criterion. Run with `--nocapture` to see the lines on success.

mod common;

use surface_stokes::assembly::{
    assemble_mass, assemble_stabilization, assemble_stiffness,
};
use surface_stokes::exact::FieldTag;
use surface_stokes::fem::{build_dofmap, eval_basis};
use surface_stokes::quadrature::triangle_rule;
use surface_stokes::study::{eoc, run_study, Preset, StudyConfig, StudyRow};
use surface_stokes::{ExactFields, Geometry, LevelSet, RhoSpec, Variant, Vec3};

const LEVEL_MAX: usize = 4;

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, id: usize, label: &str, ok: bool, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {id} ({label}): {verdict} [{detail}]");
        if !ok {
            self.failures.push(format!("criterion {id} ({label}): {detail}"));
        }
    }
}

/// Error series of one metric for one variant, by level.
fn series(rows: &[StudyRow], variant: &str, metric: &str) -> Vec<f64> {
    let mut levels: Vec<&StudyRow> =
        rows.iter().filter(|r| r.variant_name == variant).collect();
    levels.sort_by_key(|r| r.level);
    assert_eq!(levels.len(), LEVEL_MAX + 1, "missing rows for {variant}");
    levels.iter().map(|r| r.metric(metric)).collect()
}

/// Mean estimated order over the last two level pairs.
fn eoc_tail_mean(errors: &[f64]) -> f64 {
    let rates = eoc(errors);
    let tail: Vec<f64> = rates.iter().rev().take(2).map(|r| r.expect("rate")).collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Estimated order over the last level pair only.
fn eoc_last(errors: &[f64]) -> f64 {
    eoc(errors).last().unwrap().expect("rate")
}

fn fmt2(name: &str, v: f64) -> String {
    format!("{name}={v:.2}")
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };

    // one combined study; the stream solve is shared by all variants of a
    // level, so this costs one coupled solve per level plus the
    // reconstruction solves of the five variants
    let variants = vec![
        Variant::standard(),
        Variant { name: "kp=2".into(), kp: 2, ..Variant::standard() },
        Variant { name: "rho_u=0".into(), rho_u: RhoSpec::Zero, ..Variant::standard() },
        Variant { name: "rho_u=1".into(), rho_u: RhoSpec::One, ..Variant::standard() },
        Variant { name: "rho_u=1/h".into(), rho_u: RhoSpec::InvH, ..Variant::standard() },
    ];
    let config = StudyConfig {
        k: 2,
        rho: RhoSpec::H,
        level_min: 0,
        level_max: LEVEL_MAX,
        tol: 1e-10,
        noise: 0.0,
        jitter: 0.0,
        variants,
    };
    let rows = run_study(&config).expect("convergence study");

    // 1: stream function, A- and L2-norm second order
    let psi_a = eoc_tail_mean(&series(&rows, "standard", "psi_a"));
    let psi_l2 = eoc_tail_mean(&series(&rows, "standard", "psi_l2"));
    gate.check(
        1,
        "stream function EOC",
        (1.7..=2.3).contains(&psi_a) && (1.7..=2.3).contains(&psi_l2),
        format!("{}, {}", fmt2("A", psi_a), fmt2("L2", psi_l2)),
    );

    // 2: vorticity, same orders
    let phi_a = eoc_tail_mean(&series(&rows, "standard", "phi_a"));
    let phi_l2 = eoc_tail_mean(&series(&rows, "standard", "phi_l2"));
    gate.check(
        2,
        "vorticity EOC",
        (1.7..=2.3).contains(&phi_a) && (1.7..=2.3).contains(&phi_l2),
        format!("{}, {}", fmt2("A", phi_a), fmt2("L2", phi_l2)),
    );

    // 3: velocity, M-norm second order, H1 first order
    let u_m = eoc_tail_mean(&series(&rows, "standard", "u_m"));
    let u_h1 = eoc_tail_mean(&series(&rows, "standard", "u_h1"));
    gate.check(
        3,
        "velocity EOC",
        (1.7..=2.3).contains(&u_m) && (0.8..=1.3).contains(&u_h1),
        format!("{}, {}", fmt2("M", u_m), fmt2("H1", u_h1)),
    );

    // 4: pressure, P1 first order in A / second in L2, P2 second in A
    let p_a = eoc_tail_mean(&series(&rows, "standard", "p_a"));
    let p_l2 = eoc_tail_mean(&series(&rows, "standard", "p_l2"));
    let p2_a = eoc_tail_mean(&series(&rows, "kp=2", "p_a"));
    gate.check(
        4,
        "pressure EOC",
        (0.8..=1.3).contains(&p_a)
            && (1.7..=2.3).contains(&p_l2)
            && (1.7..=2.3).contains(&p2_a),
        format!("{}, {}, {}", fmt2("A(kp=1)", p_a), fmt2("L2(kp=1)", p_l2), fmt2("A(kp=2)", p2_a)),
    );

    // 5: velocity stabilization sweep, last level pair
    let m_h = eoc_last(&series(&rows, "standard", "u_m"));
    let m_0 = eoc_last(&series(&rows, "rho_u=0", "u_m"));
    let m_1 = eoc_last(&series(&rows, "rho_u=1", "u_m"));
    let m_invh = eoc_last(&series(&rows, "rho_u=1/h", "u_m"));
    let h1_h = eoc_last(&series(&rows, "standard", "u_h1"));
    let h1_0 = eoc_last(&series(&rows, "rho_u=0", "u_h1"));
    gate.check(
        5,
        "velocity stabilization sweep",
        (0.7..=1.3).contains(&m_invh)
            && (1.2..=1.8).contains(&m_1)
            && (1.7..=2.3).contains(&m_h)
            && (1.7..=2.3).contains(&m_0)
            && h1_0 <= h1_h - 0.3,
        format!(
            "{}, {}, {}, {}, {}, {}",
            fmt2("M(1/h)", m_invh),
            fmt2("M(1)", m_1),
            fmt2("M(h)", m_h),
            fmt2("M(0)", m_0),
            fmt2("H1(0)", h1_0),
            fmt2("H1(h)", h1_h)
        ),
    );

    // 6: facet normal loses one M-norm order. This runs as its own study
    // on the noisy-level-set geometry: with exact nodal samples the
    // lattice facet-normal error oscillates with near-zero local mean and
    // its effect on the projected velocity superconverges, hiding the
    // order loss at these levels.
    let normal_rows =
        run_study(&StudyConfig::preset(Preset::NormalCompare, 0, LEVEL_MAX)).expect("normal study");
    let m_kg1 = eoc_tail_mean(&series(&normal_rows, "kg=1", "u_m"));
    let m_kg2 = eoc_tail_mean(&series(&normal_rows, "kg=2", "u_m"));
    gate.check(
        6,
        "facet-normal velocity EOC",
        (0.7..=1.3).contains(&m_kg1) && (1.7..=2.3).contains(&m_kg2),
        format!("{}, {}", fmt2("M(kg=1)", m_kg1), fmt2("M(kg=2)", m_kg2)),
    );

    // 7: discrete area converges to 4 pi with second order
    let area = eoc_tail_mean(&series(&rows, "standard", "area_err"));
    gate.check(7, "surface area EOC", (1.8..=2.2).contains(&area), fmt2("area", area));

    // 8: energy identity gap, pure geometric error
    let energy = eoc_tail_mean(&series(&rows, "standard", "energy_gap"));
    gate.check(8, "energy identity EOC", (1.5..=2.5).contains(&energy), fmt2("gap", energy));

    // 9: property suite, no PDE solve involved
    let detail = property_suite();
    gate.check(9, "solve-free property suite", detail.is_empty(), if detail.is_empty() {
        "all properties hold".into()
    } else {
        detail
    });

    assert!(
        gate.failures.is_empty(),
        "acceptance failures:\n{}",
        gate.failures.join("\n")
    );
}

/// Returns an empty string when every property holds, otherwise the list of
/// violated properties.
fn property_suite() -> String {
    let mut bad = Vec::new();

    // quadrature monomial exactness
    for degree in 1..=6 {
        let rule = triangle_rule(degree).unwrap();
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                let c = degree - a - b;
                let value: f64 = rule
                    .iter()
                    .map(|n| {
                        n.weight
                            * n.bary[0].powi(a as i32)
                            * n.bary[1].powi(b as i32)
                            * n.bary[2].powi(c as i32)
                    })
                    .sum();
                let f = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
                let exact = 2.0 * f(a) * f(b) * f(c) / f(a + b + c + 2);
                if (value - exact).abs() > 1e-14 {
                    bad.push(format!("quadrature degree {degree} monomial ({a},{b},{c})"));
                }
            }
        }
    }

    // partition of unity at interior points of a skewed tet
    let verts = [
        Vec3::new(0.1, -0.2, 0.0),
        Vec3::new(1.3, 0.1, -0.1),
        Vec3::new(0.2, 1.1, 0.3),
        Vec3::new(-0.1, 0.4, 1.2),
    ];
    for k in 1..=2 {
        for i in 0..10 {
            let t = (i as f64 + 0.5) / 10.0;
            let p = verts[0] * (1.0 - 0.7 * t) + verts[1] * (0.3 * t) + verts[2] * (0.25 * t)
                + verts[3] * (0.15 * t);
            let basis = eval_basis(&verts, k, p);
            let sum: f64 = basis.values.iter().sum();
            let gsum: Vec3 = basis.gradients.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || gsum.norm() > 1e-10 {
                bad.push(format!("partition of unity, k={k}"));
                break;
            }
        }
    }

    // matrix symmetry and the constant-field kernel of B + S
    let geom = Geometry::build(&LevelSet::sphere(), 0).expect("geometry");
    let dofmap = build_dofmap(&geom.mesh, &geom.active, 2);
    let mass = assemble_mass(&dofmap, &geom).mat;
    let stiff = assemble_stiffness(&dofmap, &geom).mat;
    let stab = assemble_stabilization(&dofmap, &geom, geom.h).expect("stab").mat;
    for (name, m) in [("M", &mass), ("B", &stiff), ("S", &stab)] {
        if m.asymmetry() > 1e-12 {
            bad.push(format!("symmetry of {name}: {:.3e}", m.asymmetry()));
        }
    }
    let bs = common::csr_sum(&[&stiff, &stab]);
    let ones = vec![1.0; bs.n_rows];
    let kernel = bs.matvec(&ones).unwrap();
    let kmax = kernel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if kmax > 1e-10 * bs.max_abs() {
        bad.push(format!("(B+S)*1 = 0 violated: {kmax:.3e}"));
    }

    // small-mesh assembly against the independent quadrature oracle
    let plane = common::plane_geometry();
    for k in [1, 2] {
        let (me, se) = common::assembly_oracle_errors(&plane, k);
        if me > 1e-10 || se > 1e-10 {
            bad.push(format!("assembly oracle k={k}: mass {me:.3e}, stiffness {se:.3e}"));
        }
    }

    // force field against the finite-difference Stokes operator
    let ex = ExactFields;
    for x in common::sphere_points(20) {
        let f = ex.force(x);
        let oracle = common::force_fd_oracle(x);
        if (f - oracle).norm() > 1e-5 * (1.0 + oracle.norm()) {
            bad.push(format!("force oracle at {x:?}"));
            break;
        }
    }

    // dual-number derivatives against finite differences
    let eps = 1e-6;
    'outer: for x in common::sphere_points(15) {
        for tag in [FieldTag::Psi, FieldTag::Phi, FieldTag::Pressure] {
            let grad = ex.ambient_gradient(tag, x);
            for j in 0..3 {
                let mut dy = Vec3::zeros();
                dy[j] = eps;
                let fd = (ex.eval(tag, x + dy) - ex.eval(tag, x - dy)) / (2.0 * eps);
                if (grad[j] - fd).abs() > 1e-6 * (1.0 + grad.norm()) {
                    bad.push(format!("dual derivative {tag:?} at {x:?}"));
                    break 'outer;
                }
            }
        }
    }

    bad.join("; ")
}
