use super::mesh::{ElemKind, Mesh};
use super::run::SimulationResult;
use super::SolverError;
use crate::constitutive::tensor::{von_mises, Sym};
use crate::constitutive::PointState;
use crate::grid::Grid;

/// Names of the element fields stored with each retained snapshot.
pub const FIELD_NAMES: [&str; 8] = ["ux", "uy", "sxx", "syy", "sxy", "svm", "damage", "kind"];

/// Element-centered scalar fields on the mesh grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub nx: usize,
    pub ny: usize,
    pub fields: Vec<(String, Grid<f64>)>,
}

impl FieldSet {
    pub fn get(&self, name: &str) -> Option<&Grid<f64>> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }
}

/// Numeric code of an element kind in the `kind` field.
pub fn kind_code(kind: ElemKind) -> f64 {
    match kind {
        ElemKind::Matrix => 0.0,
        ElemKind::Interphase => 1.0,
        ElemKind::Fiber => 2.0,
    }
}

/// Gauss-point averages per element. The von Mises field is NaN on fiber
/// elements.
pub(crate) fn element_fields(mesh: &Mesh, u: &[f64], states: &[[PointState; 4]]) -> FieldSet {
    let n = mesh.n_elements();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); FIELD_NAMES.len()];
    for e in 0..n {
        let nodes = mesh.element_nodes(e);
        let ux = nodes.iter().map(|&k| u[2 * k]).sum::<f64>() / 4.0;
        let uy = nodes.iter().map(|&k| u[2 * k + 1]).sum::<f64>() / 4.0;
        let s: Sym = states[e].iter().map(|p| p.stress).sum::<Sym>() / 4.0;
        let d = states[e].iter().map(|p| p.damage).sum::<f64>() / 4.0;
        let kind = mesh.kinds.as_slice()[e];
        let svm = if kind.is_fiber() { f64::NAN } else { von_mises(&s) };
        let row = [ux, uy, s[0], s[1], s[3] / std::f64::consts::SQRT_2, svm, d, kind_code(kind)];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    FieldSet {
        nx: mesh.nx,
        ny: mesh.ny,
        fields: FIELD_NAMES
            .iter()
            .zip(cols)
            .map(|(name, c)| (name.to_string(), Grid::from_vec(mesh.nx, mesh.ny, c)))
            .collect(),
    }
}

/// The image-facing fields of one retained snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedFields {
    /// Matrix von Mises stress, NaN over fibers.
    pub von_mises: Grid<f64>,
    pub damage: Grid<f64>,
    pub ux: Grid<f64>,
    pub fiber_mask: Grid<bool>,
}

pub fn extract_fields(result: &SimulationResult, index: usize) -> Result<ExtractedFields, SolverError> {
    if index >= result.curve.len() {
        return Err(SolverError::FieldUnavailable(format!(
            "index {index} out of range for {} increments",
            result.curve.len()
        )));
    }
    let snap = result
        .snapshot(index)
        .ok_or_else(|| SolverError::FieldUnavailable(format!("fields at increment {index} were not retained")))?;
    fields_of(&snap.fields)
}

pub fn fields_of(set: &FieldSet) -> Result<ExtractedFields, SolverError> {
    let get = |name: &str| {
        set.get(name)
            .cloned()
            .ok_or_else(|| SolverError::FieldUnavailable(format!("missing field {name}")))
    };
    let kind = get("kind")?;
    Ok(ExtractedFields {
        von_mises: get("svm")?,
        damage: get("damage")?,
        ux: get("ux")?,
        fiber_mask: kind.map(|k| *k == kind_code(ElemKind::Fiber)),
    })
}
