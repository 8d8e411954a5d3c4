use super::tensor::{deviatoric_projector, identity, trace, Sym, Tangent};
use super::{
    damage_g_slope, damage_g_unchecked, damage_rate, damage_update_with, failure_criterion,
    ConstitutiveError, MatrixParams,
};

const RETURN_TOL: f64 = 1e-10;
const RETURN_MAX_ITER: usize = 100;

/// State of one matrix material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    /// Total strain.
    pub strain: Sym,
    pub plastic_strain: Sym,
    /// Nominal stress, `(1 − d)·σ̄`.
    pub stress: Sym,
    /// Undamaged (effective) stress `σ̄`.
    pub effective_stress: Sym,
    /// Current uniaxial-tension yield stress; both strengths of the yield
    /// surface scale with `yield_ref / σt`.
    pub yield_ref: f64,
    pub equivalent_plastic_strain: f64,
    pub damage: f64,
    /// Damage threshold `Y`.
    pub threshold: f64,
    /// Set once the strain failure surface is reached.
    pub damaged: bool,
    /// `τ̄₀`, the damage driving value at failure initiation.
    pub tau0: f64,
}

impl PointState {
    pub fn virgin(p: &MatrixParams) -> Self {
        Self {
            strain: Sym::zeros(),
            plastic_strain: Sym::zeros(),
            stress: Sym::zeros(),
            effective_stress: Sym::zeros(),
            yield_ref: p.sigma_t,
            equivalent_plastic_strain: 0.0,
            damage: 0.0,
            threshold: 0.0,
            damaged: false,
            tau0: 0.0,
        }
    }

    /// `½ εₑ:σ̄`, the undamaged elastic energy density (MPa).
    pub fn elastic_energy(&self) -> f64 {
        0.5 * (self.strain - self.plastic_strain).dot(&self.effective_stress)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressUpdate {
    pub state: PointState,
    /// Consistent tangent `∂σ/∂ε` in Mandel form.
    pub tangent: Tangent,
}

/// Yield surface with both strengths scaled by `r`.
fn scaled_yield(q_vm: f64, i1: f64, r: f64, p: &MatrixParams) -> f64 {
    2.0 * q_vm * q_vm + 2.0 * i1 * (p.sigma_c - p.sigma_t) * r - 2.0 * p.sigma_c * p.sigma_t * r * r
}

/// Closed-form integral of `dr/dλ = (a/σt)·r^(−b)`.
fn hardened_ratio(r_n: f64, dlambda: f64, p: &MatrixParams) -> f64 {
    let b1 = p.hardening_b + 1.0;
    (r_n.powf(b1) + b1 * p.hardening_a / p.sigma_t * dlambda).powf(1.0 / b1)
}

/// Strain-driven update of one matrix point from the converged `state` by
/// the increment `d_strain`, over pseudo-time `dt`.
///
/// Elastic predictor, then radial return along the deviatoric (von Mises)
/// direction onto the pressure-sensitive yield surface, then viscous damage
/// once the strain failure surface has been reached.
pub fn matrix_stress_update(
    state: &PointState,
    d_strain: &Sym,
    dt: f64,
    p: &MatrixParams,
) -> Result<StressUpdate, ConstitutiveError> {
    let iso = p.elasticity();
    let (g, k) = (iso.shear, iso.bulk());
    let one = identity();
    let strain = state.strain + d_strain;

    let trial = iso.stress(&(strain - state.plastic_strain));
    let p_tr = trace(&trial) / 3.0;
    let i1 = 3.0 * p_tr;
    let s_tr = trial - one * p_tr;
    let q_tr = (1.5 * s_tr.norm_squared()).sqrt();
    let r_n = state.yield_ref / p.sigma_t;
    let scale = p.sigma_c * p.sigma_t;

    let mut plastic_strain = state.plastic_strain;
    let mut yield_ref = state.yield_ref;
    let mut eq_plastic = state.equivalent_plastic_strain;
    let (effective, d_ep) = if scaled_yield(q_tr, i1, r_n, p) <= RETURN_TOL * scale {
        (trial, iso.stiffness())
    } else if q_tr <= 0.0 {
        // Pure hydrostatic trial outside the apex: nothing to return along.
        (trial, one * one.transpose() * k)
    } else {
        let residual = |dl: f64| {
            let r = hardened_ratio(r_n, dl, p);
            scaled_yield(q_tr - 3.0 * g * dl, i1, r, p)
        };
        let max_dl = q_tr / (3.0 * g);
        let n_hat = s_tr / s_tr.norm();
        if residual(max_dl) >= 0.0 {
            // Beyond the hydrostatic apex of the surface: the deviator is
            // removed entirely.
            plastic_strain += n_hat * (1.5f64.sqrt() * max_dl);
            yield_ref = hardened_ratio(r_n, max_dl, p) * p.sigma_t;
            eq_plastic += max_dl;
            (one * p_tr, one * one.transpose() * k)
        } else {
            let (mut lo, mut hi) = (0.0, max_dl);
            let mut dl = 0.0;
            let mut f = residual(dl);
            let mut iterations = 0;
            loop {
                let r = hardened_ratio(r_n, dl, p);
                let q_vm = q_tr - 3.0 * g * dl;
                let slope = -12.0 * g * q_vm
                    + (2.0 * i1 * (p.sigma_c - p.sigma_t) - 4.0 * scale * r)
                        * (p.hardening_a / p.sigma_t)
                        * r.powf(-p.hardening_b);
                let mut next = dl - f / slope;
                if !(next > lo && next < hi) || !next.is_finite() {
                    next = 0.5 * (lo + hi);
                }
                let step = (next - dl).abs();
                dl = next;
                f = residual(dl);
                if f > 0.0 {
                    lo = dl;
                } else {
                    hi = dl;
                }
                iterations += 1;
                if f.abs() <= RETURN_TOL * scale || step <= 1e-15 * max_dl {
                    break;
                }
                if iterations >= RETURN_MAX_ITER {
                    return Err(ConstitutiveError::ReturnMapping {
                        iterations,
                        residual: f,
                    });
                }
            }
            let r = hardened_ratio(r_n, dl, p);
            let q_vm = q_tr - 3.0 * g * dl;
            let rho = q_vm / q_tr;
            plastic_strain += n_hat * (1.5f64.sqrt() * dl);
            yield_ref = r * p.sigma_t;
            eq_plastic += dl;

            // Linearize the converged residual in (Δλ, q_tr, I₁).
            let f_dl = -12.0 * g * q_vm
                + (2.0 * i1 * (p.sigma_c - p.sigma_t) - 4.0 * scale * r)
                    * (p.hardening_a / p.sigma_t)
                    * r.powf(-p.hardening_b);
            let f_q = 4.0 * q_vm;
            let f_i1 = 2.0 * (p.sigma_c - p.sigma_t) * r;
            let dq_tr = n_hat * (2.0 * g * 1.5f64.sqrt());
            let d_dl = -(dq_tr * f_q + one * (3.0 * k * f_i1)) / f_dl;
            let dq_vm = dq_tr - d_dl * (3.0 * g);
            let d_rho = (dq_vm * q_tr - dq_tr * q_vm) / (q_tr * q_tr);
            let tangent = one * one.transpose() * k
                + deviatoric_projector() * (2.0 * g * rho)
                + s_tr * d_rho.transpose();
            (one * p_tr + s_tr * rho, tangent)
        }
    };

    let elastic_strain = strain - plastic_strain;
    let tau = (elastic_strain.dot(&effective)).max(0.0).sqrt();
    let mut damage = state.damage;
    let mut threshold = state.threshold;
    let mut damaged = state.damaged;
    let mut tau0 = state.tau0;
    let mut tangent = d_ep;

    if !damaged {
        if failure_criterion(&strain, p) >= 0.0 && tau > 0.0 {
            damaged = true;
            tau0 = tau;
            threshold = p.initial_threshold;
        }
    } else if tau > tau0 {
        let g_val = damage_g_unchecked(tau, tau0, p);
        let (d_new, y_new) =
            damage_update_with(p.damage_rule, damage, threshold, g_val, dt, p.damage_viscosity);
        let applied = y_new != threshold;
        let unclamped = d_new < 1.0;
        if applied && unclamped {
            let dd = damage_rate(p.damage_rule, dt, p.damage_viscosity) * damage_g_slope(tau, tau0, p);
            let dtau = d_ep.transpose() * elastic_strain / tau;
            tangent = d_ep * (1.0 - d_new) - effective * (dtau * dd).transpose();
        } else {
            tangent = d_ep * (1.0 - d_new);
        }
        damage = d_new;
        threshold = y_new;
    }
    if !(damaged && state.damaged) {
        tangent = d_ep * (1.0 - damage);
    }

    Ok(StressUpdate {
        state: PointState {
            strain,
            plastic_strain,
            stress: effective * (1.0 - damage),
            effective_stress: effective,
            yield_ref,
            equivalent_plastic_strain: eq_plastic,
            damage,
            threshold,
            damaged,
            tau0,
        },
        tangent,
    })
}

/// Whether the effective stress lies inside or on the hardened yield surface.
pub fn is_admissible(state: &PointState, p: &MatrixParams) -> bool {
    let r = state.yield_ref / p.sigma_t;
    let s = &state.effective_stress;
    let q = super::tensor::von_mises(s);
    scaled_yield(q, trace(s), r, p) <= 1e-8 * p.sigma_c * p.sigma_t
}

#[cfg(test)]
mod tests {
    use super::super::tensor::{from_plane_strain, plane_strain_tangent, stress_in_plane};
    use super::super::DamageRule;
    use super::*;
    use proptest::prelude::*;

    fn p() -> MatrixParams {
        MatrixParams::default()
    }

    /// Applies `total` in `steps` equal increments from the virgin state.
    fn ramp(total: [f64; 3], steps: usize, p: &MatrixParams) -> PointState {
        let mut s = PointState::virgin(p);
        let inc = from_plane_strain(total) / steps as f64;
        for _ in 0..steps {
            s = matrix_stress_update(&s, &inc, 0.01, p).unwrap().state;
        }
        s
    }

    #[test]
    fn small_increment_is_elastic() {
        let p = p();
        let s0 = PointState::virgin(&p);
        let de = from_plane_strain([1e-4, -2e-5, 3e-5]);
        let up = matrix_stress_update(&s0, &de, 0.01, &p).unwrap();
        let expected = p.elasticity().stiffness() * de;
        assert!((up.state.stress - expected).norm() < 1e-12);
        assert_eq!(up.state.plastic_strain, Sym::zeros());
        assert_eq!(up.tangent, p.elasticity().stiffness());
    }

    #[test]
    fn plastic_state_lies_on_surface() {
        let p = p();
        let s = ramp([0.004, 0.0, 0.06], 10, &p);
        assert!(s.equivalent_plastic_strain > 0.0);
        assert!(s.yield_ref > p.sigma_t);
        let r = s.yield_ref / p.sigma_t;
        let phi = scaled_yield(super::super::tensor::von_mises(&s.effective_stress), trace(&s.effective_stress), r, &p);
        assert!(phi.abs() < 1e-6 * p.sigma_c * p.sigma_t, "phi = {phi}");
        assert!(is_admissible(&s, &p));
        // Plastic flow is deviatoric.
        assert!(trace(&s.plastic_strain).abs() < 1e-14);
    }

    /// Uniaxial strain ramp: linear, smooth yielding, then softening after
    /// failure initiation.
    #[test]
    fn uniaxial_ramp_shape() {
        let p = p();
        let mut s = PointState::virgin(&p);
        let inc = from_plane_strain([2e-4, 0.0, 0.0]);
        let mut curve = vec![];
        for _ in 0..400 {
            s = matrix_stress_update(&s, &inc, 0.01, &p).unwrap().state;
            curve.push((s.strain[0], s.stress[0], s.damaged));
        }
        let c11 = p.elasticity().stiffness()[(0, 0)];
        assert!((curve[0].1 - c11 * 2e-4).abs() < 1e-9);
        let peak = curve.iter().map(|c| c.1).fold(f64::MIN, f64::max);
        let first_damage = curve.iter().position(|c| c.2).expect("failure must initiate");
        assert!(curve[first_damage].0 < 0.05);
        assert!(curve.last().unwrap().1 < 0.5 * peak);
        assert!(s.damage > 0.5);
    }

    fn fd_check(state: &PointState, de: [f64; 3], dt: f64, p: &MatrixParams) -> f64 {
        let base = from_plane_strain(de);
        let up = matrix_stress_update(state, &base, dt, p).unwrap();
        let analytic = plane_strain_tangent(&up.tangent);
        let h = 1e-7;
        let mut max_err: f64 = 0.0;
        let scale = analytic.abs().max();
        for j in 0..3 {
            let mut e_plus = de;
            let mut e_minus = de;
            e_plus[j] += h;
            e_minus[j] -= h;
            let sp = stress_in_plane(&matrix_stress_update(state, &from_plane_strain(e_plus), dt, p).unwrap().state.stress);
            let sm = stress_in_plane(&matrix_stress_update(state, &from_plane_strain(e_minus), dt, p).unwrap().state.stress);
            for i in 0..3 {
                let fd = (sp[i] - sm[i]) / (2.0 * h);
                max_err = max_err.max((fd - analytic[(i, j)]).abs() / scale);
            }
        }
        max_err
    }

    #[test]
    fn tangent_matches_finite_differences_elastic() {
        let p = p();
        let s = PointState::virgin(&p);
        assert!(fd_check(&s, [1e-3, 2e-4, -5e-4], 0.01, &p) < 1e-4);
    }

    #[test]
    fn tangent_matches_finite_differences_plastic() {
        let p = p();
        let s = ramp([0.004, 0.001, 0.06], 10, &p);
        assert!(s.equivalent_plastic_strain > 0.0 && !s.damaged);
        assert!(fd_check(&s, [1e-3, 1e-4, 2e-4], 0.01, &p) < 1e-4);
    }

    #[test]
    fn tangent_matches_finite_differences_damaged() {
        for rule in [DamageRule::Relaxation, DamageRule::AsPrinted] {
            let p = MatrixParams {
                damage_rule: rule,
                ..p()
            };
            let s = ramp([0.045, 0.0, 0.002], 45, &p);
            assert!(s.damaged);
            let up = matrix_stress_update(&s, &from_plane_strain([1e-3, 0.0, 1e-4]), 0.01, &p).unwrap();
            assert!(up.state.damage > s.damage, "damage must evolve in this step");
            assert!(fd_check(&s, [1e-3, 0.0, 1e-4], 0.01, &p) < 1e-4);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn damage_monotone_in_unit_interval(
            steps in prop::collection::vec((-2e-3f64..4e-3, -2e-3f64..2e-3, -2e-3f64..2e-3), 1..80)
        ) {
            let p = p();
            let mut s = PointState::virgin(&p);
            for (a, b, c) in steps {
                let next = matrix_stress_update(&s, &from_plane_strain([a, b, c]), 0.01, &p).unwrap().state;
                prop_assert!(next.damage >= s.damage);
                prop_assert!((0.0..=1.0).contains(&next.damage));
                s = next;
            }
        }
    }
}
