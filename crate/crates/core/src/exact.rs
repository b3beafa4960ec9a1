//! Closed-form unit-sphere benchmark fields and a forward-mode dual-number
//! derivative engine.
//!
//! All fields are degree-0 homogeneous (constant along sphere normals), so
//! the formulas themselves are their constant-normal extensions and the
//! ambient dual-number gradient is the gradient of the extension.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Vec3;

/// Forward-mode dual number carrying a value and its three ambient partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub g: Vec3,
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Self { v, g: Vec3::zeros() }
    }

    /// The three coordinate variables seeded at `x`.
    pub fn variables(x: Vec3) -> [Self; 3] {
        [
            Self { v: x.x, g: Vec3::new(1.0, 0.0, 0.0) },
            Self { v: x.y, g: Vec3::new(0.0, 1.0, 0.0) },
            Self { v: x.z, g: Vec3::new(0.0, 0.0, 1.0) },
        ]
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Self { v: s, g: self.g / (2.0 * s) }
    }

    pub fn cos(self) -> Self {
        Self { v: self.v.cos(), g: -self.v.sin() * self.g }
    }

    pub fn sin(self) -> Self {
        Self { v: self.v.sin(), g: self.v.cos() * self.g }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, g: self.g + o.g }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, g: self.g - o.g }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, g: self.v * o.g + o.v * self.g }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual {
            v: self.v / o.v,
            g: (self.g * o.v - o.g * self.v) / (o.v * o.v),
        }
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, g: -self.g }
    }
}
impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, s: f64) -> Dual {
        Dual { v: self.v * s, g: self.g * s }
    }
}

/// Scalar abstraction so the field formulas are written once and evaluated
/// either on plain floats or on dual numbers.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lit(v: f64) -> Self;
    fn sqrt(self) -> Self;
}

impl Scalar for f64 {
    fn lit(v: f64) -> Self {
        v
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

impl Scalar for Dual {
    fn lit(v: f64) -> Self {
        Dual::constant(v)
    }
    fn sqrt(self) -> Self {
        Dual::sqrt(self)
    }
}

fn psi_impl<S: Scalar>(x: [S; 3]) -> S {
    let [x1, x2, x3] = x;
    let r2 = x1 * x1 + x2 * x2 + x3 * x3;
    let r = r2.sqrt();
    let r3 = r2 * r;
    let c6 = S::lit(6f64.cos());
    (x1 * (S::lit(6.0) * x3 + x2) * r - x2 * x2 * x3 * c6) / r3
}

fn phi_impl<S: Scalar>(x: [S; 3]) -> S {
    let [x1, x2, x3] = x;
    let r2 = x1 * x1 + x2 * x2 + x3 * x3;
    let r = r2.sqrt();
    let r3 = r2 * r;
    let c6 = S::lit(6f64.cos());
    -(S::lit(6.0))
        * (x1 * (S::lit(6.0) * x3 + x2) * r
            + S::lit(1.0 / 3.0) * c6 * x3 * (x1 * x1 - S::lit(5.0) * x2 * x2 + x3 * x3))
        / r3
}

fn p_impl<S: Scalar>(x: [S; 3]) -> S {
    let [x1, x2, x3] = x;
    let r2 = x1 * x1 + x2 * x2 + x3 * x3;
    let r = r2.sqrt();
    let r3 = r2 * r;
    let c36 = S::lit(36f64.cos());
    (S::lit(216.0) * x2 * x3 + x1 * c36 * r) * x1 / r3
}

fn u_impl<S: Scalar>(x: [S; 3]) -> [S; 3] {
    let [x1, x2, x3] = x;
    let r2 = x1 * x1 + x2 * x2 + x3 * x3;
    let r = r2.sqrt();
    let r3 = r2 * r;
    let c6 = S::lit(6f64.cos());
    let six = S::lit(6.0);
    let two = S::lit(2.0);
    let u1 = (x1 * (six * x2 - x3) * r - x2 * c6 * (x2 * x2 - two * x3 * x3)) / r3;
    let u2 = -(-(c6 * x1 * x2 * x2) + (six * x1 * x1 - six * x3 * x3 - x2 * x3) * r) / r3;
    let u3 = -((six * x2 * x3 - x1 * x1 + x2 * x2) * r + two * c6 * x1 * x2 * x3) / r3;
    [u1, u2, u3]
}

/// Field selector for [`ExactFields::eval`] and the gradient helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldTag {
    Psi,
    Phi,
    Pressure,
}

/// Closed-form stream function, vorticity, velocity, pressure and force of
/// the unit-sphere benchmark (`alpha = 1`, `K = 1`).
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactFields;

impl ExactFields {
    pub fn psi(&self, x: Vec3) -> f64 {
        psi_impl([x.x, x.y, x.z])
    }

    pub fn phi(&self, x: Vec3) -> f64 {
        phi_impl([x.x, x.y, x.z])
    }

    pub fn pressure(&self, x: Vec3) -> f64 {
        p_impl([x.x, x.y, x.z])
    }

    pub fn u(&self, x: Vec3) -> Vec3 {
        let [a, b, c] = u_impl([x.x, x.y, x.z]);
        Vec3::new(a, b, c)
    }

    pub fn eval(&self, tag: FieldTag, x: Vec3) -> f64 {
        match tag {
            FieldTag::Psi => self.psi(x),
            FieldTag::Phi => self.phi(x),
            FieldTag::Pressure => self.pressure(x),
        }
    }

    /// Value and ambient gradient (of the constant-normal extension).
    pub fn eval_dual(&self, tag: FieldTag, x: Vec3) -> Dual {
        let vars = Dual::variables(x);
        match tag {
            FieldTag::Psi => psi_impl(vars),
            FieldTag::Phi => phi_impl(vars),
            FieldTag::Pressure => p_impl(vars),
        }
    }

    /// Ambient gradient of the scalar field extension.
    pub fn ambient_gradient(&self, tag: FieldTag, x: Vec3) -> Vec3 {
        self.eval_dual(tag, x).g
    }

    /// Ambient Jacobian of the velocity extension; rows are component
    /// gradients.
    pub fn u_jacobian(&self, x: Vec3) -> nalgebra::Matrix3<f64> {
        let [u1, u2, u3] = u_impl(Dual::variables(x));
        nalgebra::Matrix3::from_rows(&[
            u1.g.transpose(),
            u2.g.transpose(),
            u3.g.transpose(),
        ])
    }

    /// Surface gradient `P(x) grad`, with `P = I - n n^T`, `n = x / |x|`.
    pub fn surface_gradient(&self, tag: FieldTag, x: Vec3) -> Vec3 {
        let n = x.normalize();
        let g = self.ambient_gradient(tag, x);
        g - n.dot(&g) * n
    }

    /// Force term of the Stokes system. On the unit sphere with
    /// `alpha = K = 1` the momentum balance reduces to
    /// `f = -1/2 n x grad_G(phi) + grad_G(p)`, built from first derivatives
    /// of the vorticity and pressure.
    pub fn force(&self, x: Vec3) -> Vec3 {
        let n = x.normalize();
        let gphi = self.surface_gradient(FieldTag::Phi, n);
        let gp = self.surface_gradient(FieldTag::Pressure, n);
        -0.5 * n.cross(&gphi) + gp
    }

    /// Surface rate-of-strain tensor of the exact velocity at a sphere
    /// point: `E_s = 1/2 (P J P + (P J P)^T)`.
    pub fn rate_of_strain(&self, x: Vec3) -> nalgebra::Matrix3<f64> {
        let n = x.normalize();
        let p = nalgebra::Matrix3::identity() - n * n.transpose();
        let j = self.u_jacobian(n);
        let pjp = p * j * p;
        0.5 * (pjp + pjp.transpose())
    }
}

/// Both sides of the energy identity evaluated with exact fields on the
/// discrete surface: `lhs = ∫ E_s(u):E_s(u) + u.u`, `rhs = ∫ 1/2 phi^2`
/// (the curvature-weighted gradient term vanishes for `K = 1`).
pub fn energy_identity(geom: &crate::Geometry) -> (f64, f64) {
    let ex = ExactFields;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for patch in &geom.patches {
        for &(x, w) in &patch.quad {
            let xs = x.normalize();
            let es = ex.rate_of_strain(xs);
            let u = ex.u(xs);
            lhs += w * (es.component_mul(&es).sum() + u.dot(&u));
            let phi = ex.phi(xs);
            rhs += w * 0.5 * phi * phi;
        }
    }
    (lhs, rhs)
}
