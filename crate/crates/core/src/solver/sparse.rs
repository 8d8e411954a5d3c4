use super::mesh::Mesh;
use super::SolverError;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::MatMut;

const NONE: u32 = u32::MAX;

/// Fixed-pattern sparse matrix on the free degrees of freedom of a mesh, with
/// the element-to-slot scatter map and a reusable symbolic LU.
pub struct FreeSystem {
    /// Free equation number of each global dof, or `None` if prescribed.
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
    pattern: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLu<usize>,
    /// Slot in `values` of entry `(a, b)` of each element matrix, column major.
    slots: Vec<[u32; 64]>,
    pub values: Vec<f64>,
}

impl FreeSystem {
    pub fn new(mesh: &Mesh, prescribed: &[bool]) -> Result<Self, SolverError> {
        let mut free_index = vec![None; prescribed.len()];
        let mut n_free = 0;
        for (dof, &p) in prescribed.iter().enumerate() {
            if !p {
                free_index[dof] = Some(n_free);
                n_free += 1;
            }
        }
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n_free];
        for e in 0..mesh.n_elements() {
            let dofs = mesh.element_dofs(e);
            for &cb in &dofs {
                let Some(c) = free_index[cb] else { continue };
                columns[c].extend(dofs.iter().filter_map(|&ra| free_index[ra]));
            }
        }
        let mut col_ptr = Vec::with_capacity(n_free + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let slots = (0..mesh.n_elements())
            .map(|e| {
                let dofs = mesh.element_dofs(e);
                let mut s = [NONE; 64];
                for (b, &cb) in dofs.iter().enumerate() {
                    let Some(c) = free_index[cb] else { continue };
                    let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
                    for (a, &ra) in dofs.iter().enumerate() {
                        if let Some(r) = free_index[ra] {
                            let k = rows.binary_search(&r).expect("pattern covers element");
                            s[b * 8 + a] = (col_ptr[c] + k) as u32;
                        }
                    }
                }
                s
            })
            .collect();
        let nnz = row_idx.len();
        let pattern = SymbolicSparseColMat::new_checked(n_free, n_free, col_ptr, None, row_idx);
        let symbolic = SymbolicLu::try_new(pattern.as_ref())
            .map_err(|e| SolverError::Linear(format!("symbolic factorization: {e:?}")))?;
        Ok(Self {
            free_index,
            n_free,
            pattern,
            symbolic,
            slots,
            values: vec![0.0; nnz],
        })
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds the free-free block of element matrix `k` (column major).
    pub fn scatter(&mut self, e: usize, k: &[f64]) {
        for (slot, v) in self.slots[e].iter().zip(k) {
            if *slot != NONE {
                self.values[*slot as usize] += v;
            }
        }
    }

    pub fn factor(&self) -> Result<Factor, SolverError> {
        let mat = SparseColMatRef::new(self.pattern.as_ref(), &self.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| SolverError::Linear(format!("numeric factorization: {e:?}")))?;
        Ok(Factor { lu })
    }
}

pub struct Factor {
    lu: Lu<usize, f64>,
}

impl Factor {
    /// Overwrites `rhs` with the solution.
    pub fn solve(&self, rhs: &mut [f64]) -> Result<(), SolverError> {
        let n = rhs.len();
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
        if rhs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SolverError::Linear("singular tangent".into()))
        }
    }
}
