//! Entry-wise verification of the assembled surface forms on a tiny cut
//! mesh against an independent high-degree quadrature rebuild.

mod common;

use common::{assembly_oracle_errors, plane_geometry};

#[test]
fn p1_mass_and_stiffness_match_independent_quadrature() {
    let geom = plane_geometry();
    assert!(geom.active.len() <= 8, "meant to be a tiny mesh");
    let (mass_err, stiff_err) = assembly_oracle_errors(&geom, 1);
    assert!(mass_err < 1e-10, "P1 mass deviation {mass_err:.3e}");
    assert!(stiff_err < 1e-10, "P1 stiffness deviation {stiff_err:.3e}");
}

#[test]
fn p2_mass_and_stiffness_match_independent_quadrature() {
    let geom = plane_geometry();
    let (mass_err, stiff_err) = assembly_oracle_errors(&geom, 2);
    assert!(mass_err < 1e-10, "P2 mass deviation {mass_err:.3e}");
    assert!(stiff_err < 1e-10, "P2 stiffness deviation {stiff_err:.3e}");
}

#[test]
fn duffy_rule_reproduces_patch_areas() {
    let geom = plane_geometry();
    let area: f64 = geom.patches.iter().map(|p| p.area()).sum();
    let one = common::duffy_integrate(&geom, |_, _| 1.0);
    assert!(
        (area - one).abs() < 1e-12 * area,
        "area {area} vs duffy {one}"
    );
}
