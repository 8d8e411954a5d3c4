use super::element::{ElemMat, ElemVec, Q4};
use super::fields::{element_fields, FieldSet};
use super::mesh::{ElemKind, Mesh};
use super::sparse::FreeSystem;
use super::{detect_esodi, SolverError};
use crate::constitutive::tensor::{from_plane_strain, plane_strain_tangent, stress_in_plane, Isotropic};
use crate::constitutive::{matrix_stress_update, CzmParams, MaterialSet, MatrixParams, PointState};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

/// Displacement-controlled loading to `target_strain` in equal increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSchedule {
    pub target_strain: f64,
    pub increments: usize,
    /// Halvings of the step allowed within one increment.
    pub max_cutbacks: u32,
}

impl Default for LoadSchedule {
    fn default() -> Self {
        Self {
            target_strain: 0.02,
            increments: 100,
            max_cutbacks: 8,
        }
    }
}

impl LoadSchedule {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.target_strain > 0.0) || self.increments == 0 {
            return Err(SolverError::InvalidInput(
                "load schedule needs target_strain > 0 and increments >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which snapshots keep full element fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldRetention {
    #[default]
    EsodiAndFinal,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Newton stops when the free-dof residual norm falls below this
    /// fraction of the reaction norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub retention: FieldRetention,
    /// End the run at the first increment past the 5% load drop.
    pub stop_at_esodi: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 25,
            retention: FieldRetention::default(),
            stop_at_esodi: false,
        }
    }
}

/// Prescribed displacements `u_p = λ·unit` on the flagged dofs, plus the dof
/// weights that turn internal forces into the reported stress measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub prescribed: Vec<bool>,
    pub unit: Vec<f64>,
    /// Homogenized stress `Σ measure·F`.
    pub measure: Vec<f64>,
    /// Opposite-edge counterpart of `measure` for the reaction balance check.
    pub counter: Vec<f64>,
}

impl Dirichlet {
    /// Transverse tension: left edge `u_x = 0`, right edge `u_x = λ·W`, and
    /// `u_y = 0` at the bottom-left corner only.
    pub fn tension(mesh: &Mesh) -> Self {
        let n = 2 * mesh.n_nodes();
        let mut d = Self {
            prescribed: vec![false; n],
            unit: vec![0.0; n],
            measure: vec![0.0; n],
            counter: vec![0.0; n],
        };
        for j in 0..=mesh.ny {
            let left = 2 * mesh.node(0, j);
            let right = 2 * mesh.node(mesh.nx, j);
            d.prescribed[left] = true;
            d.prescribed[right] = true;
            d.unit[right] = mesh.width;
            d.measure[right] = 1.0 / mesh.height;
            d.counter[left] = -1.0 / mesh.height;
        }
        d.prescribed[2 * mesh.node(0, 0) + 1] = true;
        d
    }

    /// Every boundary node follows the linear field `u = g·x`.
    pub fn linear_boundary(mesh: &Mesh, g: [[f64; 2]; 2]) -> Self {
        let n = 2 * mesh.n_nodes();
        let mut d = Self {
            prescribed: vec![false; n],
            unit: vec![0.0; n],
            measure: vec![0.0; n],
            counter: vec![0.0; n],
        };
        for j in 0..=mesh.ny {
            for i in 0..=mesh.nx {
                if i == 0 || j == 0 || i == mesh.nx || j == mesh.ny {
                    let node = mesh.node(i, j);
                    let [x, y] = mesh.node_xy(node);
                    for c in 0..2 {
                        d.prescribed[2 * node + c] = true;
                        d.unit[2 * node + c] = g[c][0] * x + g[c][1] * y;
                    }
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub strain: f64,
    /// Homogenized stress (MPa).
    pub stress: f64,
    /// `|Σ measure·F + Σ counter·F| / |Σ measure·F|`, zero for a perfect
    /// reaction balance.
    pub imbalance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Index into the curve.
    pub index: usize,
    pub applied_strain: f64,
    pub stress: f64,
    pub fields: FieldSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub newton_iterations: usize,
    pub cutbacks: usize,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub nx: usize,
    pub ny: usize,
    pub curve: Vec<CurvePoint>,
    /// Snapshots with retained fields, in curve order.
    pub snapshots: Vec<Snapshot>,
    pub peak_index: Option<usize>,
    pub esodi_index: Option<usize>,
    pub stats: RunStats,
}

impl SimulationResult {
    pub fn stresses(&self) -> Vec<f64> {
        self.curve.iter().map(|p| p.stress).collect()
    }

    pub fn snapshot(&self, index: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.index == index)
    }

    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Matrix parameters for the interphase ring. Under uniaxial strain the
/// failure surface is reached exactly at `ε = εt`, where the normal stress is
/// `(λ + 2G)·εt`; setting `εt = T_c/(λ + 2G)` makes the ring fail when the
/// opening traction reaches the cohesive strength. The tensile strength is
/// capped at `T_c` as well.
pub fn interphase_params(m: &MatrixParams, czm: &CzmParams) -> MatrixParams {
    let el = m.elasticity();
    let p_modulus = el.lambda + 2.0 * el.shear;
    MatrixParams {
        eps_t: (czm.t_c / p_modulus).min(m.eps_t),
        sigma_t: m.sigma_t.min(czm.t_c),
        ..*m
    }
}

/// Damaged elements keep this fraction of their elastic stiffness in the
/// Newton matrix so fully broken regions stay solvable.
const STIFFNESS_FLOOR: f64 = 1e-8;

struct Model<'a> {
    mesh: &'a Mesh,
    q4: Q4,
    matrix: MatrixParams,
    interphase: MatrixParams,
    fiber: Isotropic,
    k_fiber: ElemMat,
    k_matrix: ElemMat,
    dirichlet: &'a Dirichlet,
}

struct ElemEval {
    k: ElemMat,
    f: ElemVec,
    states: [PointState; 4],
}

struct Evaluation {
    elems: Vec<ElemEval>,
    internal: Vec<f64>,
    kfp_unit: Vec<f64>,
}

impl Model<'_> {
    fn params(&self, kind: ElemKind) -> &MatrixParams {
        match kind {
            ElemKind::Interphase => &self.interphase,
            _ => &self.matrix,
        }
    }

    fn gather(&self, u: &[f64], e: usize) -> ElemVec {
        let dofs = self.mesh.element_dofs(e);
        ElemVec::from_fn(|r, _| u[dofs[r]])
    }

    fn eval_element(
        &self,
        e: usize,
        u: &[f64],
        u_n: &[f64],
        states: &[PointState; 4],
        dt: f64,
    ) -> Result<ElemEval, SolverError> {
        let kind = *self.mesh.kinds.as_slice().get(e).expect("element index");
        let ue = self.gather(u, e);
        if kind.is_fiber() {
            let mut out = *states;
            for (s, b) in out.iter_mut().zip(&self.q4.b) {
                let eps = b * ue;
                s.strain = from_plane_strain([eps[0], eps[1], eps[2]]);
                s.effective_stress = self.fiber.stress(&s.strain);
                s.stress = s.effective_stress;
            }
            return Ok(ElemEval {
                k: self.k_fiber,
                f: self.k_fiber * ue,
                states: out,
            });
        }
        let p = self.params(kind);
        let due = ue - self.gather(u_n, e);
        let mut k = ElemMat::zeros();
        let mut f = ElemVec::zeros();
        let mut out = *states;
        let mut damage = 0.0f64;
        for ((s, b), old) in out.iter_mut().zip(&self.q4.b).zip(states) {
            let de = b * due;
            let up = matrix_stress_update(old, &from_plane_strain([de[0], de[1], de[2]]), dt, p)?;
            let c: Matrix3<f64> = plane_strain_tangent(&up.tangent);
            let sig = Vector3::from(stress_in_plane(&up.state.stress));
            k += b.transpose() * c * b * self.q4.weight;
            f += b.transpose() * sig * self.q4.weight;
            damage = damage.max(up.state.damage);
            *s = up.state;
        }
        if damage > 0.0 {
            k += self.k_matrix * (STIFFNESS_FLOOR * damage);
        }
        Ok(ElemEval { k, f, states: out })
    }

    fn evaluate(
        &self,
        u: &[f64],
        u_n: &[f64],
        states: &[[PointState; 4]],
        dt: f64,
        sys: &mut FreeSystem,
    ) -> Result<Evaluation, SolverError> {
        let elems = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|e| self.eval_element(e, u, u_n, &states[e], dt))
            .collect::<Result<Vec<_>, _>>()?;
        let mut internal = vec![0.0; u.len()];
        let mut kfp_unit = vec![0.0; sys.n_free];
        sys.clear();
        for (e, ev) in elems.iter().enumerate() {
            let dofs = self.mesh.element_dofs(e);
            for (a, &da) in dofs.iter().enumerate() {
                internal[da] += ev.f[a];
                if let Some(ra) = sys.free_index[da] {
                    for (b, &db) in dofs.iter().enumerate() {
                        if self.dirichlet.prescribed[db] {
                            kfp_unit[ra] += ev.k[(a, b)] * self.dirichlet.unit[db];
                        }
                    }
                }
            }
            sys.scatter(e, ev.k.as_slice());
        }
        Ok(Evaluation {
            elems,
            internal,
            kfp_unit,
        })
    }
}

struct Converged {
    u: Vec<f64>,
    states: Vec<[PointState; 4]>,
    internal: Vec<f64>,
    k_values: Vec<f64>,
    kfp_unit: Vec<f64>,
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Transverse tension of `mesh` under `schedule`.
pub fn run(
    mesh: &Mesh,
    materials: &MaterialSet,
    schedule: &LoadSchedule,
    settings: &SolverSettings,
) -> Result<SimulationResult, SolverError> {
    run_with(mesh, materials, &Dirichlet::tension(mesh), schedule, settings)
}

/// Incremental Newton solution for arbitrary prescribed displacements
/// scaled by the load parameter.
pub fn run_with(
    mesh: &Mesh,
    materials: &MaterialSet,
    dirichlet: &Dirichlet,
    schedule: &LoadSchedule,
    settings: &SolverSettings,
) -> Result<SimulationResult, SolverError> {
    schedule.validate()?;
    materials.validate()?;
    let n_dofs = 2 * mesh.n_nodes();
    if dirichlet.prescribed.len() != n_dofs || dirichlet.unit.len() != n_dofs {
        return Err(SolverError::InvalidInput("boundary data does not match mesh".into()));
    }
    let q4 = Q4::new(mesh.hx(), mesh.hy());
    let fiber = materials.fiber.transverse_elasticity();
    let matrix_el = materials.matrix.elasticity();
    let k_fiber = q4.stiffness(&plane_strain_tangent(&fiber.stiffness()));
    let k_matrix = q4.stiffness(&plane_strain_tangent(&matrix_el.stiffness()));
    let model = Model {
        mesh,
        q4,
        matrix: materials.matrix,
        interphase: interphase_params(&materials.matrix, &materials.interface),
        fiber,
        k_fiber,
        k_matrix,
        dirichlet,
    };
    let mut sys = FreeSystem::new(mesh, &dirichlet.prescribed)?;
    let force_floor = 1e-9 * materials.matrix.youngs_mpa() * mesh.hx().max(mesh.hy());

    let virgin = PointState::virgin(&materials.matrix);
    let u0 = vec![0.0; n_dofs];
    let states0 = vec![[virgin; 4]; mesh.n_elements()];
    let ev0 = model.evaluate(&u0, &u0, &states0, 0.0, &mut sys)?;
    let mut conv = Converged {
        u: u0,
        states: states0,
        internal: ev0.internal,
        k_values: sys.values.clone(),
        kfp_unit: ev0.kfp_unit,
    };

    let mut result = SimulationResult {
        nx: mesh.nx,
        ny: mesh.ny,
        curve: Vec::with_capacity(schedule.increments),
        snapshots: Vec::new(),
        peak_index: None,
        esodi_index: None,
        stats: RunStats::default(),
    };
    let base = schedule.target_strain / schedule.increments as f64;
    let mut lambda = 0.0;
    let mut step = base;
    // Candidate snapshot at the first 5% drop after the running peak.
    let mut esodi_candidate: Option<Snapshot> = None;

    for inc in 1..=schedule.increments {
        let goal = schedule.target_strain * inc as f64 / schedule.increments as f64;
        let mut halvings = 0u32;
        while goal - lambda > 1e-12 * base {
            let dl = step.min(goal - lambda);
            let dt = dl / schedule.target_strain;
            match newton_step(&model, &mut sys, &conv, lambda + dl, dl, dt, settings, force_floor, &mut result.stats) {
                Ok(next) => {
                    conv = next;
                    lambda += dl;
                    result.stats.substeps += 1;
                    step = (2.0 * step).min(base);
                }
                Err(e) if e.is_recoverable() => {
                    halvings += 1;
                    result.stats.cutbacks += 1;
                    if halvings > schedule.max_cutbacks {
                        finish(&mut result, esodi_candidate.take(), None);
                        return Err(SolverError::CutbackLimit {
                            strain: lambda,
                            reason: e.to_string(),
                            partial: Box::new(result),
                        });
                    }
                    step = 0.5 * dl;
                }
                Err(e) => return Err(e),
            }
        }

        let stress = dot(&dirichlet.measure, &conv.internal);
        let other = dot(&dirichlet.counter, &conv.internal);
        let imbalance = if stress != 0.0 { (stress - other).abs() / stress.abs() } else { 0.0 };
        let index = result.curve.len();
        result.curve.push(CurvePoint {
            strain: goal,
            stress,
            imbalance,
        });
        let make_snapshot = |conv: &Converged| Snapshot {
            index,
            applied_strain: goal,
            stress,
            fields: element_fields(mesh, &conv.u, &conv.states),
        };

        // Track the running peak and the first 5% drop after it.
        let peak = result.peak_index.map(|p| result.curve[p].stress);
        if peak.is_none_or(|p| stress > p) {
            result.peak_index = Some(index);
            esodi_candidate = None;
            result.esodi_index = None;
        } else if result.esodi_index.is_none() && stress <= 0.95 * peak.unwrap_or(stress) {
            result.esodi_index = Some(index);
            esodi_candidate = Some(make_snapshot(&conv));
        }
        let last = inc == schedule.increments || (settings.stop_at_esodi && result.esodi_index.is_some());
        if settings.retention == FieldRetention::All && !last {
            result.snapshots.push(make_snapshot(&conv));
        }
        if last {
            let final_snap = make_snapshot(&conv);
            finish(&mut result, esodi_candidate.take(), Some(final_snap));
            break;
        }
    }
    debug_assert_eq!(detect_esodi(&result.stresses()).ok(), result.esodi_index);
    Ok(result)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finish(result: &mut SimulationResult, esodi: Option<Snapshot>, last: Option<Snapshot>) {
    for snap in esodi.into_iter().chain(last) {
        if result.snapshot(snap.index).is_none() {
            result.snapshots.push(snap);
        }
    }
    result.snapshots.sort_by_key(|s| s.index);
}

#[allow(clippy::too_many_arguments)]
fn newton_step(
    model: &Model<'_>,
    sys: &mut FreeSystem,
    conv: &Converged,
    lambda: f64,
    dl: f64,
    dt: f64,
    settings: &SolverSettings,
    force_floor: f64,
    stats: &mut RunStats,
) -> Result<Converged, SolverError> {
    let d = model.dirichlet;
    let mut u = conv.u.clone();
    for (dof, ui) in u.iter_mut().enumerate() {
        if d.prescribed[dof] {
            *ui = lambda * d.unit[dof];
        }
    }
    // Predictor with the converged tangent: K_ff·δ = −K_fp·Δu_p.
    sys.values.copy_from_slice(&conv.k_values);
    let mut rhs: Vec<f64> = conv.kfp_unit.iter().map(|v| -v * dl).collect();
    sys.factor()?.solve(&mut rhs)?;
    apply(&mut u, &rhs, &sys.free_index);

    for _ in 0..settings.max_iterations {
        stats.newton_iterations += 1;
        let ev = model.evaluate(&u, &conv.u, &conv.states, dt, sys)?;
        let mut residual = vec![0.0; sys.n_free];
        let mut reaction_sq = 0.0;
        for (dof, f) in ev.internal.iter().enumerate() {
            match sys.free_index[dof] {
                Some(r) => residual[r] = -f,
                None => reaction_sq += f * f,
            }
        }
        let r_norm = norm(residual.iter().copied());
        if !r_norm.is_finite() {
            return Err(SolverError::Diverged("non-finite residual".into()));
        }
        if r_norm <= settings.tolerance * reaction_sq.sqrt().max(force_floor) {
            return Ok(Converged {
                u,
                states: ev.elems.into_iter().map(|e| e.states).collect(),
                internal: ev.internal,
                k_values: sys.values.clone(),
                kfp_unit: ev.kfp_unit,
            });
        }
        sys.factor()?.solve(&mut residual)?;
        apply(&mut u, &residual, &sys.free_index);
    }
    Err(SolverError::Diverged(format!(
        "no convergence in {} Newton iterations",
        settings.max_iterations
    )))
}

fn apply(u: &mut [f64], delta: &[f64], free_index: &[Option<usize>]) {
    for (ui, fi) in u.iter_mut().zip(free_index) {
        if let Some(r) = fi {
            *ui += delta[*r];
        }
    }
}
