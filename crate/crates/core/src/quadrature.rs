//! Quadrature rules on the reference triangle and reference tetrahedron.

use crate::{Error, Result, Vec3};

/// A quadrature node on the reference triangle in barycentric coordinates.
/// Weights sum to 1; physical weights are `w * area`.
#[derive(Debug, Clone, Copy)]
pub struct TriNode {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Symmetric Gauss rules on the reference triangle, exact for polynomials
/// of the requested total degree. Supported degrees: 1..=6.
pub fn triangle_rule(degree: usize) -> Result<Vec<TriNode>> {
    let mut nodes = Vec::new();
    fn push_sym3(nodes: &mut Vec<TriNode>, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        nodes.push(TriNode { bary: [b, a, a], weight: w });
        nodes.push(TriNode { bary: [a, b, a], weight: w });
        nodes.push(TriNode { bary: [a, a, b], weight: w });
    }
    match degree {
        1 => {
            nodes.push(TriNode { bary: [1.0 / 3.0; 3], weight: 1.0 });
        }
        2 => {
            push_sym3(&mut nodes, 1.0 / 6.0, 1.0 / 3.0);
        }
        3 => {
            nodes.push(TriNode { bary: [1.0 / 3.0; 3], weight: -27.0 / 48.0 });
            push_sym3(&mut nodes, 0.2, 25.0 / 48.0);
        }
        4 => {
            push_sym3(&mut nodes, 0.445948490915965, 0.223381589678011);
            push_sym3(&mut nodes, 0.091576213509771, 0.109951743655322);
        }
        5 => {
            nodes.push(TriNode { bary: [1.0 / 3.0; 3], weight: 0.225 });
            push_sym3(&mut nodes, 0.470142064105115, 0.132394152788506);
            push_sym3(&mut nodes, 0.101286507323456, 0.125939180544827);
        }
        6 => {
            push_sym3(&mut nodes, 0.249286745170910, 0.116786275726379);
            push_sym3(&mut nodes, 0.063089014491502, 0.050844906370207);
            // 6-fold orbit
            let (a, b) = (0.310352451033785, 0.053145049844816);
            let c = 1.0 - a - b;
            let w = 0.082851075618374;
            for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                nodes.push(TriNode { bary: p, weight: w });
            }
        }
        _ => return Err(Error::UnsupportedDegree(degree)),
    }
    Ok(nodes)
}

/// A quadrature node on the reference tetrahedron
/// `{x >= 0, x1 + x2 + x3 <= 1}`. Weights sum to the reference volume 1/6;
/// physical weights are `w * |det J|` with the affine map Jacobian J.
#[derive(Debug, Clone, Copy)]
pub struct TetNode {
    pub point: Vec3,
    pub weight: f64,
}

/// Gauss-Legendre nodes and weights on [0, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Conical-product rule on the reference tetrahedron via the Duffy map from
/// the unit cube, exact for total degree `degree`.
pub fn tet_rule(degree: usize) -> Result<Vec<TetNode>> {
    if degree == 0 || degree > 10 {
        return Err(Error::UnsupportedDegree(degree));
    }
    // The Duffy substitution raises per-axis degree by at most 2 (Jacobian
    // (1-u1)^2 (1-u2)), so Gauss-Legendre with 2q-1 >= degree+2 is exact.
    let q = (degree + 4) / 2;
    let gl = gauss_legendre_unit(q);
    let mut nodes = Vec::with_capacity(q * q * q);
    for &(u1, w1) in &gl {
        for &(u2, w2) in &gl {
            for &(u3, w3) in &gl {
                let x1 = u1;
                let x2 = u2 * (1.0 - u1);
                let x3 = u3 * (1.0 - u1) * (1.0 - u2);
                let jac = (1.0 - u1) * (1.0 - u1) * (1.0 - u2);
                nodes.push(TetNode {
                    point: Vec3::new(x1, x2, x3),
                    weight: w1 * w2 * w3 * jac,
                });
            }
        }
    }
    Ok(nodes)
}
