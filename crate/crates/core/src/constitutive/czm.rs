use super::CzmParams;

/// Interface history.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CzmState {
    /// Largest effective opening reached (nm).
    pub delta_max: f64,
    /// Energy released so far (N/m).
    pub dissipated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzmTraction {
    /// Effective traction including the viscous term (MPa).
    pub magnitude: f64,
    pub normal: f64,
    pub tangential: f64,
    pub state: CzmState,
}

/// Bilinear loading envelope at effective opening `delta` (nm).
pub fn czm_envelope(delta: f64, p: &CzmParams) -> f64 {
    let delta_f = p.delta_f();
    if delta <= 0.0 {
        0.0
    } else if delta <= p.delta_c {
        p.t_c * delta / p.delta_c
    } else if delta < delta_f {
        p.t_c * (delta_f - delta) / (delta_f - p.delta_c)
    } else {
        0.0
    }
}

/// Energy that cannot be recovered after opening to `delta_max`: the
/// envelope area minus the elastic triangle under the secant (N/m).
pub fn czm_dissipated(delta_max: f64, p: &CzmParams) -> f64 {
    if delta_max <= p.delta_c {
        return 0.0;
    }
    let delta_f = p.delta_f();
    let d = delta_max.min(delta_f);
    let t = czm_envelope(d, p);
    let envelope_area = 0.5 * p.t_c * p.delta_c + 0.5 * (p.t_c + t) * (d - p.delta_c);
    (envelope_area - 0.5 * t * d) / 1000.0
}

/// Traction for opening `delta_n` and sliding `delta_t` (nm) at opening rate
/// `rate` (nm per unit pseudo-time).
///
/// Negative `delta_n` is resisted by a linear penalty of `10·T_c/δ_c` and
/// does not contribute to the effective opening.
pub fn czm_traction(delta_n: f64, delta_t: f64, rate: f64, state: &CzmState, p: &CzmParams) -> CzmTraction {
    let open_n = delta_n.max(0.0);
    let delta = open_n.hypot(delta_t);
    let delta_max = state.delta_max.max(delta);
    let next = CzmState {
        delta_max,
        dissipated: czm_dissipated(delta_max, p),
    };

    // Secant stiffness: the envelope on loading, the ray to the origin on
    // unloading.
    let secant = if delta_max <= p.delta_c {
        p.t_c / p.delta_c
    } else {
        czm_envelope(delta_max, p) / delta_max
    };
    let (mut normal, mut tangential) = (secant * open_n, secant * delta_t);
    if delta > 0.0 {
        normal += p.viscosity * rate * open_n / delta;
        tangential += p.viscosity * rate * delta_t / delta;
    }
    let magnitude = normal.hypot(tangential);
    if delta_n < 0.0 {
        normal = 10.0 * p.t_c / p.delta_c * delta_n;
    }
    CzmTraction {
        magnitude,
        normal,
        tangential,
        state: next,
    }
}
