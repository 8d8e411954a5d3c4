//! Random fiber arrangements for unidirectional composite cross-sections.
//!
//! Generation runs in two phases. The fibers start on a staggered lattice and
//! are first shuffled by random non-overlapping moves; a second round of moves
//! then only accepts displacements that bring the nearest-neighbor-distance
//! (NND) histogram closer to a target histogram, measured by KL divergence.

mod generate;
mod histogram;
mod io;
mod lattice;

pub use generate::{generate, GenConfig, GenOutcome, NndMetric, Perturber, PerturbMode};
pub use histogram::{kl_divergence, reference_target, BinSpec, NndHistogram, KL_SMOOTHING};
pub use io::{read_histogram, read_rve, write_histogram, write_rve};
pub use lattice::init_staggered;

use crate::grid::{Phase, PhaseGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RveError {
    #[error("invalid RVE spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error("need at least 2 fibers, got {0}")]
    TooFewFibers(usize),
    #[error("histogram bins do not match")]
    BinMismatch,
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("{phase} did not converge within {iterations} iterations (final KL {kl:.6})")]
    NotConverged {
        phase: &'static str,
        iterations: usize,
        kl: f64,
        best: Box<Rve>,
        trace: Vec<f64>,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fiber {
    /// Center in μm.
    pub center: [f64; 2],
    /// Radius in μm.
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RveSpec {
    pub width: f64,
    pub height: f64,
    pub n_fibers: usize,
    pub fiber_radius: f64,
    pub min_gap: f64,
}

impl Default for RveSpec {
    /// 54 × 54 μm cell with 46 fibers of 7 μm diameter.
    fn default() -> Self {
        Self {
            width: 54.0,
            height: 54.0,
            n_fibers: 46,
            fiber_radius: 3.5,
            min_gap: 0.05,
        }
    }
}

impl RveSpec {
    pub fn validate(&self) -> Result<(), RveError> {
        let finite = [self.width, self.height, self.fiber_radius, self.min_gap]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(RveError::InvalidSpec("non-finite dimension".into()));
        }
        if self.width <= 0.0 || self.height <= 0.0 || self.fiber_radius <= 0.0 {
            return Err(RveError::InvalidSpec(
                "width, height and fiber radius must be positive".into(),
            ));
        }
        if self.min_gap < 0.0 {
            return Err(RveError::InvalidSpec("min_gap must be >= 0".into()));
        }
        if self.fiber_area_fraction() > 1.0 {
            return Err(RveError::Infeasible(format!(
                "total fiber area exceeds domain area (fraction {:.3})",
                self.fiber_area_fraction()
            )));
        }
        Ok(())
    }

    /// Minimum admissible center-to-center distance.
    pub fn min_center_distance(&self) -> f64 {
        2.0 * self.fiber_radius + self.min_gap
    }

    pub fn fiber_area_fraction(&self) -> f64 {
        self.n_fibers as f64 * std::f64::consts::PI * self.fiber_radius.powi(2)
            / (self.width * self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Every fiber lies entirely inside the domain.
    #[default]
    Contained,
    /// Fibers may cross the boundary and re-enter on the opposite side.
    Periodic,
}

impl BoundaryPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryPolicy::Contained => "contained",
            BoundaryPolicy::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contained" => Ok(BoundaryPolicy::Contained),
            "periodic" => Ok(BoundaryPolicy::Periodic),
            other => Err(format!("unknown boundary policy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rve {
    pub spec: RveSpec,
    pub boundary: BoundaryPolicy,
    pub fibers: Vec<Fiber>,
}

impl Rve {
    pub fn new(spec: RveSpec, boundary: BoundaryPolicy, fibers: Vec<Fiber>) -> Self {
        Self {
            spec,
            boundary,
            fibers,
        }
    }

    /// Separation vector from fiber `a` to point `b`, using the minimum image
    /// under periodic boundaries.
    pub fn separation(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut dx = b[0] - a[0];
        let mut dy = b[1] - a[1];
        if self.boundary == BoundaryPolicy::Periodic {
            dx -= self.spec.width * (dx / self.spec.width).round();
            dy -= self.spec.height * (dy / self.spec.height).round();
        }
        [dx, dy]
    }

    pub fn center_distance(&self, i: usize, j: usize) -> f64 {
        let [dx, dy] = self.separation(self.fibers[i].center, self.fibers[j].center);
        dx.hypot(dy)
    }

    /// Whether a center position respects the boundary policy.
    pub fn center_admissible(&self, c: [f64; 2]) -> bool {
        match self.boundary {
            BoundaryPolicy::Contained => {
                let r = self.spec.fiber_radius;
                c[0] >= r && c[0] <= self.spec.width - r && c[1] >= r && c[1] <= self.spec.height - r
            }
            BoundaryPolicy::Periodic => {
                c[0] >= 0.0 && c[0] < self.spec.width && c[1] >= 0.0 && c[1] < self.spec.height
            }
        }
    }

    /// Symmetric matrix of center distances, zero diagonal.
    pub fn distance_matrix(&self) -> Result<Vec<Vec<f64>>, RveError> {
        let n = self.fibers.len();
        if n < 2 {
            return Err(RveError::TooFewFibers(n));
        }
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.center_distance(i, j);
                m[i][j] = d;
                m[j][i] = d;
            }
        }
        Ok(m)
    }

    /// Per-fiber center-to-center nearest-neighbor distance.
    pub fn nnd(&self) -> Result<Vec<f64>, RveError> {
        let m = self.distance_matrix()?;
        Ok(nnd_from_matrix(&m))
    }

    /// Pairs `(i, j)` closer than `2r + min_gap`, found by exhaustive scan.
    /// `tol` relaxes the bound (use a small positive value after text round-trips).
    pub fn intersecting_pairs(&self, tol: f64) -> Vec<(usize, usize)> {
        let limit = self.spec.min_center_distance() - tol;
        let mut out = Vec::new();
        for i in 0..self.fibers.len() {
            for j in (i + 1)..self.fibers.len() {
                if self.center_distance(i, j) < limit {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn check_invariants(&self, tol: f64) -> Result<(), RveError> {
        if self.fibers.len() != self.spec.n_fibers {
            return Err(RveError::InvalidSpec(format!(
                "fiber count {} != spec {}",
                self.fibers.len(),
                self.spec.n_fibers
            )));
        }
        let r = self.spec.fiber_radius;
        for (k, f) in self.fibers.iter().enumerate() {
            let inside = match self.boundary {
                BoundaryPolicy::Contained => {
                    f.center[0] >= r - tol
                        && f.center[0] <= self.spec.width - r + tol
                        && f.center[1] >= r - tol
                        && f.center[1] <= self.spec.height - r + tol
                }
                BoundaryPolicy::Periodic => self.center_admissible(f.center),
            };
            if !inside {
                return Err(RveError::InvalidSpec(format!("fiber {k} outside domain")));
            }
        }
        if let Some((i, j)) = self.intersecting_pairs(tol).first() {
            return Err(RveError::InvalidSpec(format!("fibers {i} and {j} intersect")));
        }
        Ok(())
    }

    /// Realized fiber area fraction. Periodic wrapping preserves area, so this
    /// is exact for both boundary policies.
    pub fn fiber_area_fraction(&self) -> f64 {
        self.fibers
            .iter()
            .map(|f| std::f64::consts::PI * f.radius * f.radius)
            .sum::<f64>()
            / (self.spec.width * self.spec.height)
    }

    /// Square phase grid with `resolution` cells per side.
    pub fn rasterize(&self, resolution: usize) -> PhaseGrid {
        self.phase_grid(resolution, resolution)
    }

    /// Tags cell `(i, j)` as fiber iff its center lies inside any fiber disk.
    pub fn phase_grid(&self, nx: usize, ny: usize) -> PhaseGrid {
        let mut grid = PhaseGrid::filled(nx, ny, Phase::Matrix);
        if nx == 0 || ny == 0 {
            return grid;
        }
        let (w, h) = (self.spec.width, self.spec.height);
        let (dx, dy) = (w / nx as f64, h / ny as f64);
        let images: &[(f64, f64)] = match self.boundary {
            BoundaryPolicy::Contained => &[(0.0, 0.0)],
            BoundaryPolicy::Periodic => &[
                (-1.0, -1.0),
                (0.0, -1.0),
                (1.0, -1.0),
                (-1.0, 0.0),
                (0.0, 0.0),
                (1.0, 0.0),
                (-1.0, 1.0),
                (0.0, 1.0),
                (1.0, 1.0),
            ],
        };
        for f in &self.fibers {
            let r2 = f.radius * f.radius;
            for &(ox, oy) in images {
                let cx = f.center[0] + ox * w;
                let cy = f.center[1] + oy * h;
                let i0 = (((cx - f.radius) / dx).floor().max(0.0)) as usize;
                let i1 = ((((cx + f.radius) / dx).ceil()) as isize).clamp(0, nx as isize) as usize;
                let j0 = (((cy - f.radius) / dy).floor().max(0.0)) as usize;
                let j1 = ((((cy + f.radius) / dy).ceil()) as isize).clamp(0, ny as isize) as usize;
                for j in j0..j1 {
                    let y = (j as f64 + 0.5) * dy;
                    for i in i0..i1 {
                        let x = (i as f64 + 0.5) * dx;
                        if (x - cx).powi(2) + (y - cy).powi(2) < r2 {
                            grid.set(i, j, Phase::Fiber);
                        }
                    }
                }
            }
        }
        grid
    }
}

pub(crate) fn nnd_from_matrix(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, d)| *d)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rve_with(centers: &[[f64; 2]]) -> Rve {
        let spec = RveSpec {
            width: 100.0,
            height: 100.0,
            n_fibers: centers.len(),
            fiber_radius: 0.5,
            min_gap: 0.0,
        };
        Rve::new(
            spec,
            BoundaryPolicy::Contained,
            centers
                .iter()
                .map(|&c| Fiber {
                    center: c,
                    radius: 0.5,
                })
                .collect(),
        )
    }

    #[test]
    fn three_four_five() {
        let rve = rve_with(&[[0.0, 0.0], [3.0, 4.0]]);
        let m = rve.distance_matrix().unwrap();
        assert_eq!(m[0][1], 5.0);
        assert_eq!(m[1][0], 5.0);
        assert_eq!(m[0][0], 0.0);
    }

    #[test]
    fn collinear_nnd() {
        let rve = rve_with(&[[0.0, 0.0], [10.0, 0.0], [12.0, 0.0]]);
        assert_eq!(rve.nnd().unwrap(), vec![10.0, 2.0, 2.0]);
    }

    #[test]
    fn single_fiber_has_no_distance_matrix() {
        let rve = rve_with(&[[50.0, 50.0]]);
        assert!(matches!(rve.distance_matrix(), Err(RveError::TooFewFibers(1))));
        assert!(rve.nnd().is_err());
    }

    #[test]
    fn periodic_minimum_image() {
        let mut rve = rve_with(&[[1.0, 50.0], [99.0, 50.0]]);
        rve.boundary = BoundaryPolicy::Periodic;
        assert!((rve.center_distance(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_rve_rasterizes_to_matrix() {
        let spec = RveSpec {
            n_fibers: 0,
            ..RveSpec::default()
        };
        let rve = Rve::new(spec, BoundaryPolicy::Contained, vec![]);
        let g = rve.rasterize(32);
        assert!(g.iter().all(|p| *p == Phase::Matrix));
    }

    #[test]
    fn centered_disk_area() {
        let spec = RveSpec {
            width: 54.0,
            height: 54.0,
            n_fibers: 1,
            fiber_radius: 10.0,
            min_gap: 0.0,
        };
        let rve = Rve::new(
            spec,
            BoundaryPolicy::Contained,
            vec![Fiber {
                center: [27.0, 27.0],
                radius: 10.0,
            }],
        );
        let analytic = std::f64::consts::PI * 100.0 / (54.0 * 54.0);
        let f = rve.rasterize(512).fiber_fraction();
        assert!((f - analytic).abs() / analytic < 0.02, "{f} vs {analytic}");
    }

    #[test]
    fn periodic_fiber_wraps_in_raster() {
        let spec = RveSpec {
            width: 10.0,
            height: 10.0,
            n_fibers: 1,
            fiber_radius: 2.0,
            min_gap: 0.0,
        };
        let rve = Rve::new(
            spec,
            BoundaryPolicy::Periodic,
            vec![Fiber {
                center: [0.5, 5.0],
                radius: 2.0,
            }],
        );
        let g = rve.rasterize(100);
        assert_eq!(*g.get(99, 50), Phase::Fiber);
        assert_eq!(*g.get(3, 50), Phase::Fiber);
        let analytic = std::f64::consts::PI * 4.0 / 100.0;
        assert!((g.fiber_fraction() - analytic).abs() / analytic < 0.02);
    }
}
