//! Point-level material laws.
//!
//! The matrix is elasto-plastic with a pressure-sensitive (Tschoegl) yield
//! surface, deviatoric von Mises flow with Ramberg–Osgood hardening, a
//! strain-based failure surface of the same form, and Simo–Ju viscous damage
//! after failure initiation. Fibers are linear elastic. Fiber/matrix
//! interfaces follow a bilinear cohesive law.

mod czm;
mod matrix;
mod params;
pub mod tensor;

pub use czm::{czm_dissipated, czm_envelope, czm_traction, CzmState, CzmTraction};
pub use matrix::{is_admissible, matrix_stress_update, PointState, StressUpdate};
pub use params::{CzmParams, DamageRule, FiberParams, MaterialSet, MatrixParams, MATERIAL_KEYS};

use tensor::{j2, trace, Sym};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("return mapping did not converge after {iterations} iterations (residual {residual:.3e})")]
    ReturnMapping { iterations: usize, residual: f64 },
}

/// Tschoegl criterion in stress space,
/// `φ = 6J₂ + 2I₁(σc − σt) − 2σcσt` (MPa²). Negative inside the elastic domain.
pub fn yield_function(stress: &Sym, p: &MatrixParams) -> f64 {
    6.0 * j2(stress) + 2.0 * trace(stress) * (p.sigma_c - p.sigma_t) - 2.0 * p.sigma_c * p.sigma_t
}

/// Ramberg–Osgood plastic tangent `H = a·(σ_Y/σ_von)^b`.
pub fn hardening_modulus(sigma_von: f64, sigma_y: f64, p: &MatrixParams) -> Result<f64, ConstitutiveError> {
    if !(sigma_y > 0.0) || sigma_von < sigma_y {
        return Err(ConstitutiveError::Domain(format!(
            "hardening needs sigma_von >= sigma_Y > 0 (got {sigma_von}, {sigma_y})"
        )));
    }
    Ok(p.hardening_a * (sigma_y / sigma_von).powf(p.hardening_b))
}

/// Same surface as [`yield_function`] written on strains with the failure
/// strains `εt`, `εc`. Non-negative values signal failure initiation.
pub fn failure_criterion(strain: &Sym, p: &MatrixParams) -> f64 {
    6.0 * j2(strain) + 2.0 * trace(strain) * (p.eps_c - p.eps_t) - 2.0 * p.eps_c * p.eps_t
}

/// `τ̄ = √(2Ξ)` for strain energy density `Ξ`.
pub fn damage_driving(energy: f64) -> Result<f64, ConstitutiveError> {
    if energy < 0.0 || !energy.is_finite() {
        return Err(ConstitutiveError::Domain(format!("strain energy {energy} must be >= 0")));
    }
    Ok((2.0 * energy).sqrt())
}

/// Damage function `G = 1 − τ̄₀(1−A)/τ̄ − A·exp(B(τ̄₀ − τ̄))`.
pub fn damage_g(tau: f64, tau0: f64, p: &MatrixParams) -> Result<f64, ConstitutiveError> {
    if !(tau0 > 0.0) || tau < tau0 {
        return Err(ConstitutiveError::Domain(format!(
            "damage function needs tau >= tau0 > 0 (got {tau}, {tau0})"
        )));
    }
    Ok(damage_g_unchecked(tau, tau0, p))
}

pub(crate) fn damage_g_unchecked(tau: f64, tau0: f64, p: &MatrixParams) -> f64 {
    1.0 - tau0 * (1.0 - p.damage_a) / tau - p.damage_a * (p.damage_b * (tau0 - tau)).exp()
}

/// `dG/dτ̄`.
pub(crate) fn damage_g_slope(tau: f64, tau0: f64, p: &MatrixParams) -> f64 {
    tau0 * (1.0 - p.damage_a) / (tau * tau)
        + p.damage_a * p.damage_b * (p.damage_b * (tau0 - tau)).exp()
}

/// Viscous damage step as printed:
/// `d′ = d + dt/(1+μ·dt)·(G − Y)`, `Y′ = (Y + μ·dt·G)/(1 + μ·dt)`,
/// applied only when `G > 0`, `Y > 0` and `G − Y > 0`; `d′` is clamped to
/// `[0, 1]`.
pub fn damage_update(d: f64, y: f64, g: f64, dt: f64, mu: f64) -> (f64, f64) {
    damage_update_with(DamageRule::AsPrinted, d, y, g, dt, mu)
}

/// [`damage_update`] with an explicit increment scaling.
pub fn damage_update_with(rule: DamageRule, d: f64, y: f64, g: f64, dt: f64, mu: f64) -> (f64, f64) {
    if !(g > 0.0 && y > 0.0 && g - y > 0.0) {
        return (d, y);
    }
    let rate = damage_rate(rule, dt, mu);
    let d_new = (d + rate * (g - y)).clamp(d, 1.0);
    let y_new = (y + mu * dt * g) / (1.0 + mu * dt);
    (d_new, y_new)
}

pub(crate) fn damage_rate(rule: DamageRule, dt: f64, mu: f64) -> f64 {
    match rule {
        DamageRule::AsPrinted => dt / (1.0 + mu * dt),
        DamageRule::Relaxation => mu * dt / (1.0 + mu * dt),
    }
}

#[cfg(test)]
mod tests {
    use super::tensor::sym;
    use super::*;
    use nalgebra::{Matrix3, Rotation3, Vector3};
    use proptest::prelude::*;

    fn p() -> MatrixParams {
        MatrixParams::default()
    }

    #[test]
    fn yield_vanishes_on_uniaxial_states() {
        let p = p();
        assert_eq!(yield_function(&sym(p.sigma_t, 0.0, 0.0, 0.0), &p), 0.0);
        assert_eq!(yield_function(&sym(-p.sigma_c, 0.0, 0.0, 0.0), &p), 0.0);
        assert_eq!(yield_function(&Sym::zeros(), &p), -9796.0);
    }

    #[test]
    fn failure_vanishes_on_uniaxial_strain() {
        let p = p();
        assert!(failure_criterion(&sym(p.eps_t, 0.0, 0.0, 0.0), &p).abs() < 1e-15);
        assert!(failure_criterion(&sym(-p.eps_c, 0.0, 0.0, 0.0), &p).abs() < 1e-15);
        assert!((failure_criterion(&Sym::zeros(), &p) + 2.0 * p.eps_c * p.eps_t).abs() < 1e-15);
    }

    #[test]
    fn failure_matches_invariant_oracle() {
        let p = p();
        let e = sym(0.013, -0.004, 0.002, 0.009);
        let m = tensor::to_matrix(&e);
        let i1 = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let mut j2 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let dev = m[(a, b)] - if a == b { i1 / 3.0 } else { 0.0 };
                j2 += 0.5 * dev * dev;
            }
        }
        let oracle = 6.0 * j2 + 2.0 * i1 * (p.eps_c - p.eps_t) - 2.0 * p.eps_c * p.eps_t;
        assert!((failure_criterion(&e, &p) - oracle).abs() < 1e-15);
    }

    #[test]
    fn hardening_values() {
        let p = p();
        assert_eq!(hardening_modulus(62.0, 62.0, &p).unwrap(), 20000.0);
        let h = hardening_modulus(124.0, 62.0, &p).unwrap();
        assert!((h - 20000.0 / 4096.0).abs() < 1e-12);
        assert!((h - 4.8828).abs() < 1e-4);
        assert!(hardening_modulus(61.0, 62.0, &p).is_err());
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let h = hardening_modulus(62.0 + k as f64, 62.0, &p).unwrap();
            assert!(h < last);
            last = h;
        }
    }

    #[test]
    fn damage_driving_values() {
        assert_eq!(damage_driving(0.0).unwrap(), 0.0);
        assert_eq!(damage_driving(0.5).unwrap(), 1.0);
        assert_eq!(damage_driving(8.0).unwrap(), 4.0);
        assert!(damage_driving(-1.0).is_err());
    }

    #[test]
    fn damage_function_values() {
        let p = p();
        assert!(damage_g(1.7, 1.7, &p).unwrap().abs() < 1e-15);
        let g = damage_g(2.0, 1.0, &p).unwrap();
        let expected = 1.0 - 0.05 / 2.0 - 0.95 * (-2.0f64).exp();
        assert!((g - expected).abs() < 1e-15);
        // 1 − 0.025 − 0.95·e⁻² to six digits.
        assert!((g - 0.846432).abs() < 1e-6);
        assert!((damage_g(1e6, 1.0, &p).unwrap() - 1.0).abs() < 1e-6);
        assert!(damage_g(0.5, 1.0, &p).is_err());
    }

    #[test]
    fn damage_update_worked_example() {
        let (d, y) = damage_update(0.1, 0.2, 0.6, 0.1, 10.0);
        assert!((d - 0.12).abs() < 1e-15);
        assert!((y - 0.4).abs() < 1e-15);
    }

    #[test]
    fn damage_update_guards() {
        assert_eq!(damage_update(0.3, 0.5, 0.4, 0.1, 10.0), (0.3, 0.5));
        assert_eq!(damage_update(0.3, 0.0, 0.4, 0.1, 10.0), (0.3, 0.0));
        assert_eq!(damage_update(0.3, 0.1, -0.2, 0.1, 10.0), (0.3, 0.1));
        let (d, _) = damage_update_with(DamageRule::Relaxation, 0.99, 0.01, 0.999, 100.0, 10.0);
        assert!(d <= 1.0);
    }

    #[test]
    fn printed_rule_saturates_at_inverse_viscosity() {
        let (mut d, mut y) = (0.0, 1e-4);
        for _ in 0..10_000 {
            (d, y) = damage_update(d, y, 0.999, 0.05, 10.0);
        }
        assert!(d < 0.1 && d > 0.09);
        let (mut d, mut y) = (0.0, 1e-4);
        for _ in 0..10_000 {
            (d, y) = damage_update_with(DamageRule::Relaxation, d, y, 0.999, 0.05, 10.0);
        }
        assert!(d > 0.99);
    }

    fn rotate(s: &Sym, angles: (f64, f64, f64)) -> Matrix3<f64> {
        let r = Rotation3::from_euler_angles(angles.0, angles.1, angles.2);
        let m = tensor::to_matrix(s);
        r.matrix() * m * r.matrix().transpose()
    }

    fn yield_of_matrix(m: &Matrix3<f64>, p: &MatrixParams) -> f64 {
        let i1 = m.trace();
        let dev = m - Matrix3::identity() * (i1 / 3.0);
        6.0 * 0.5 * (dev * dev).trace() + 2.0 * i1 * (p.sigma_c - p.sigma_t) - 2.0 * p.sigma_c * p.sigma_t
    }

    proptest! {
        #[test]
        fn yield_is_isotropic(
            xx in -100.0f64..100.0, yy in -100.0f64..100.0, zz in -100.0f64..100.0, xy in -50.0f64..50.0,
            a in 0.0f64..6.3, b in 0.0f64..3.1, c in 0.0f64..6.3,
        ) {
            let p = p();
            let s = sym(xx, yy, zz, xy);
            let rotated = rotate(&s, (a, b, c));
            let reference = yield_function(&s, &p);
            let _ = Vector3::<f64>::zeros();
            prop_assert!((yield_of_matrix(&rotated, &p) - reference).abs() < 1e-8 * reference.abs().max(1.0));
        }
    }
}
