//! Symmetric 3-D tensors in Mandel notation `[xx, yy, zz, √2·xy]`.
//!
//! Plane-strain kinematics keep the out-of-plane component explicit, so the
//! invariants below are those of the full 3-D tensor. In Mandel form the
//! double contraction is the plain dot product and isotropic elasticity is an
//! ordinary 4×4 matrix.

use nalgebra::{Matrix3, Matrix4, Vector4};

pub type Sym = Vector4<f64>;
pub type Tangent = Matrix4<f64>;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn identity() -> Sym {
    Sym::new(1.0, 1.0, 1.0, 0.0)
}

/// Builds from tensor components (not engineering shear).
pub fn sym(xx: f64, yy: f64, zz: f64, xy: f64) -> Sym {
    Sym::new(xx, yy, zz, SQRT2 * xy)
}

/// In-plane engineering strain `[εxx, εyy, γxy]` with `εzz = 0`.
pub fn from_plane_strain(e: [f64; 3]) -> Sym {
    Sym::new(e[0], e[1], 0.0, e[2] / SQRT2)
}

/// In-plane stress `[σxx, σyy, σxy]`.
pub fn stress_in_plane(s: &Sym) -> [f64; 3] {
    [s[0], s[1], s[3] / SQRT2]
}

pub fn shear(v: &Sym) -> f64 {
    v[3] / SQRT2
}

pub fn trace(v: &Sym) -> f64 {
    v[0] + v[1] + v[2]
}

pub fn deviator(v: &Sym) -> Sym {
    v - identity() * (trace(v) / 3.0)
}

/// Second invariant of the deviator, `½ s:s`.
pub fn j2(v: &Sym) -> f64 {
    0.5 * deviator(v).norm_squared()
}

pub fn von_mises(v: &Sym) -> f64 {
    (3.0 * j2(v)).sqrt()
}

/// Full 3×3 tensor form, mostly for tests and rotations.
pub fn to_matrix(v: &Sym) -> Matrix3<f64> {
    let xy = shear(v);
    Matrix3::new(v[0], xy, 0.0, xy, v[1], 0.0, 0.0, 0.0, v[2])
}

/// Deviatoric projector `I − ⅓ 1⊗1`.
pub fn deviatoric_projector() -> Tangent {
    Tangent::identity() - identity() * identity().transpose() / 3.0
}

/// Plane-strain 3×3 tangent relating `[dεxx, dεyy, dγxy]` to
/// `[dσxx, dσyy, dσxy]`.
pub fn plane_strain_tangent(c: &Tangent) -> Matrix3<f64> {
    const MAP: [usize; 3] = [0, 1, 3];
    let scale = [1.0, 1.0, 1.0 / SQRT2];
    Matrix3::from_fn(|a, b| c[(MAP[a], MAP[b])] * scale[a] * scale[b])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isotropic {
    pub lambda: f64,
    pub shear: f64,
}

impl Isotropic {
    pub fn from_young_poisson(e: f64, nu: f64) -> Self {
        Self {
            lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            shear: e / (2.0 * (1.0 + nu)),
        }
    }

    pub fn bulk(&self) -> f64 {
        self.lambda + 2.0 * self.shear / 3.0
    }

    pub fn stiffness(&self) -> Tangent {
        identity() * identity().transpose() * self.lambda + Tangent::identity() * (2.0 * self.shear)
    }

    pub fn stress(&self, strain: &Sym) -> Sym {
        identity() * (self.lambda * trace(strain)) + strain * (2.0 * self.shear)
    }
}
