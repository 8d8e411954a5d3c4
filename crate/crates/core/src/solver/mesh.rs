use super::SolverError;
use crate::grid::{Grid, Phase};
use crate::rve::Rve;

/// Material assigned to one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemKind {
    Matrix,
    /// Matrix element touching a fiber element, or a fiber element touching
    /// a different fiber. Given weakened failure properties.
    Interphase,
    Fiber,
}

impl ElemKind {
    pub fn is_fiber(self) -> bool {
        self == ElemKind::Fiber
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    pub elems_per_diameter: usize,
    pub max_elements: usize,
    pub interphase: bool,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            elems_per_diameter: 20,
            max_elements: 1_000_000,
            interphase: true,
        }
    }
}

/// Regular grid of bilinear quadrilaterals over the RVE. Element `(i, j)`
/// spans `[i·hx, (i+1)·hx] × [j·hy, (j+1)·hy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub kinds: Grid<ElemKind>,
}

impl Mesh {
    pub fn hx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Node coordinates.
    pub fn node_xy(&self, n: usize) -> [f64; 2] {
        let (i, j) = (n % (self.nx + 1), n / (self.nx + 1));
        [i as f64 * self.hx(), j as f64 * self.hy()]
    }

    /// Counter-clockwise corner nodes of element `e`, starting bottom-left.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = (e % self.nx, e / self.nx);
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ]
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.element_nodes(e);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    pub fn fiber_fraction(&self) -> f64 {
        let n = self.kinds.iter().filter(|k| k.is_fiber()).count();
        n as f64 / self.n_elements().max(1) as f64
    }

    /// All-matrix mesh, for tests and calibration.
    pub fn uniform(width: f64, height: f64, nx: usize, ny: usize) -> Self {
        Self {
            width,
            height,
            nx,
            ny,
            kinds: Grid::filled(nx, ny, ElemKind::Matrix),
        }
    }
}

/// Meshes `rve` with elements no larger than `2r / elems_per_diameter`.
/// Elements whose centroid falls inside a fiber are fiber elements.
pub fn build_mesh(rve: &Rve, opts: &MeshOptions) -> Result<Mesh, SolverError> {
    if opts.elems_per_diameter == 0 {
        return Err(SolverError::InvalidInput("elems_per_diameter must be >= 1".into()));
    }
    let h = 2.0 * rve.spec.fiber_radius / opts.elems_per_diameter as f64;
    let count = |len: f64| (len / h - 1e-9).ceil().max(1.0) as usize;
    let (nx, ny) = (count(rve.spec.width), count(rve.spec.height));
    if nx.saturating_mul(ny) > opts.max_elements {
        return Err(SolverError::MeshTooLarge {
            elements: nx.saturating_mul(ny),
            limit: opts.max_elements,
        });
    }
    let phases = rve.phase_grid(nx, ny);
    let (hx, hy) = (rve.spec.width / nx as f64, rve.spec.height / ny as f64);
    let owner = Grid::from_fn(nx, ny, |i, j| {
        if *phases.get(i, j) != Phase::Fiber {
            return None;
        }
        let c = [(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy];
        (0..rve.fibers.len()).min_by(|&a, &b| {
            let da = rve.separation(c, rve.fibers[a].center);
            let db = rve.separation(c, rve.fibers[b].center);
            da[0].hypot(da[1]).total_cmp(&db[0].hypot(db[1]))
        })
    });
    let neighbors = |i: usize, j: usize| {
        (-1isize..=1)
            .flat_map(|dj| (-1isize..=1).map(move |di| (di, dj)))
            .filter_map(move |(di, dj)| {
                let (a, b) = (i as isize + di, j as isize + dj);
                (a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny)
                    .then_some((a as usize, b as usize))
            })
    };
    let kinds = Grid::from_fn(nx, ny, |i, j| match owner.get(i, j) {
        // Fiber cells bordering another fiber become interphase so that
        // touching fibers never bond directly.
        Some(id) => {
            let contact = opts.interphase
                && neighbors(i, j).any(|(a, b)| matches!(owner.get(a, b), Some(o) if o != id));
            if contact {
                ElemKind::Interphase
            } else {
                ElemKind::Fiber
            }
        }
        None if opts.interphase && neighbors(i, j).any(|(a, b)| owner.get(a, b).is_some()) => {
            ElemKind::Interphase
        }
        None => ElemKind::Matrix,
    });
    Ok(Mesh {
        width: rve.spec.width,
        height: rve.spec.height,
        nx,
        ny,
        kinds,
    })
}
