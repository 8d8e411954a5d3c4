//! Plane-strain finite element simulation of an RVE under transverse tension.
//!
//! The RVE is meshed with a regular grid of bilinear quadrilaterals (2×2
//! Gauss points). Fiber elements are linear elastic, matrix elements follow
//! the damaging elasto-plastic law, and a one-element matrix ring around each
//! fiber can carry interface-calibrated failure properties. The right edge is
//! displaced incrementally; each increment is solved by Newton iterations on
//! the consistent tangent with a sparse LU factorization, halving the step on
//! failure.

mod element;
mod fields;
mod io;
mod mesh;
mod run;
mod sparse;

pub use element::Q4;
pub use fields::{extract_fields, fields_of, kind_code, ExtractedFields, FieldSet, FIELD_NAMES};
pub use io::{read_curve, read_snapshot, write_curve, write_snapshot, CURVE_HEADER, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use mesh::{build_mesh, ElemKind, Mesh, MeshOptions};
pub use run::{
    interphase_params, run, run_with, CurvePoint, Dirichlet, FieldRetention, LoadSchedule, RunStats,
    SimulationResult, Snapshot, SolverSettings,
};

use crate::constitutive::ConstitutiveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mesh of {elements} elements exceeds the limit of {limit}")]
    MeshTooLarge { elements: usize, limit: usize },
    #[error("linear solve failed: {0}")]
    Linear(String),
    #[error("Newton iteration failed: {0}")]
    Diverged(String),
    #[error(transparent)]
    Material(#[from] ConstitutiveError),
    #[error("step cutback limit reached at strain {strain:.6}: {reason}")]
    CutbackLimit {
        strain: f64,
        reason: String,
        partial: Box<SimulationResult>,
    },
    #[error("ESoDI not reached: {0}")]
    EsodiNotReached(String),
    #[error("fields unavailable: {0}")]
    FieldUnavailable(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SolverError {
    /// Failures that a smaller load step may cure.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            SolverError::Linear(_) | SolverError::Diverged(_) | SolverError::Material(_)
        )
    }
}

/// Index of the first point after the peak whose stress is at most 95% of
/// the peak: the end of the stage of damage initiation (ESoDI).
pub fn detect_esodi(stresses: &[f64]) -> Result<usize, SolverError> {
    let (peak, &max) = stresses
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .ok_or_else(|| SolverError::EsodiNotReached("empty curve".into()))?;
    if !(max > 0.0) {
        return Err(SolverError::EsodiNotReached("no positive peak".into()));
    }
    stresses[peak + 1..]
        .iter()
        .position(|&s| s <= 0.95 * max)
        .map(|k| peak + 1 + k)
        .ok_or_else(|| {
            SolverError::EsodiNotReached(format!(
                "stress never fell to 95% of the peak {max:.4} reached at point {peak}"
            ))
        })
}
