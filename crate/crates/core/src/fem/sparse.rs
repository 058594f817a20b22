//! Sparse and banded linear algebra for the assembled operators.
//!
//! Operators are stored in compressed sparse row form with the symbolic Q2
//! stencil fixed up front (≤ 25 nonzeros per row, sorted columns), so
//! repeated per-time-step assemblies reuse the pattern and remain
//! deterministic. Systems are solved either by a banded LDLᵀ factorization
//! (default — the Crank-Nicolson left-hand side is symmetric positive
//! definite because the mass term dominates the mildly negative reaction) or
//! by Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::fem::mesh::FemMesh;

/// Linear solver selection for the implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolver {
    /// Banded LDLᵀ factorization, refactored every step. Exact up to
    /// rounding; the default.
    Direct,
    /// Jacobi-preconditioned conjugate gradients with the given relative
    /// residual tolerance and iteration cap.
    ConjugateGradient {
        /// Relative residual target (‖r‖/‖b‖).
        tol: f64,
        /// Iteration cap before reporting failure.
        max_iter: usize,
    },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Direct
    }
}

/// Compressed-sparse-row matrix over mesh nodes with a symmetric symbolic
/// pattern and deterministic (sorted) column ordering.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    /// Dimension (number of mesh nodes).
    pub n: usize,
    /// Row start offsets (length `n + 1`).
    pub row_ptr: Vec<usize>,
    /// Column indices, sorted within each row.
    pub col_idx: Vec<usize>,
    /// Entry values, aligned with `col_idx`.
    pub values: Vec<f64>,
}

impl SparseOperator {
    /// Builds the symbolic Q2 pattern for a mesh: node `(ix, iy)` couples to
    /// every node of every element containing it, a tensor box of grid
    /// indices.
    pub fn q2_pattern(mesh: &FemMesh) -> Self {
        let nnx = mesh.nodes_x();
        let nny = mesh.nodes_y();
        let n = nnx * nny;
        let span = |i: usize, last: usize| -> (usize, usize) {
            if i % 2 == 0 {
                (i.saturating_sub(2), (i + 2).min(last))
            } else {
                (i - 1, i + 1)
            }
        };
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for iy in 0..nny {
            let (ylo, yhi) = span(iy, nny - 1);
            for ix in 0..nnx {
                let (xlo, xhi) = span(ix, nnx - 1);
                for jy in ylo..=yhi {
                    for jx in xlo..=xhi {
                        col_idx.push(jy * nnx + jx);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Resets all stored values to zero, keeping the pattern.
    pub fn zero_values(&mut self) {
        self.values.fill(0.0);
    }

    /// Position of entry `(i, j)` in the value array, if present.
    #[inline]
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|k| lo + k)
    }

    /// Adds `v` to entry `(i, j)`; panics if the entry is outside the
    /// symbolic pattern (which would indicate an assembly bug).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .index_of(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the symbolic pattern"));
        self.values[k] += v;
    }

    /// Entry `(i, j)`, treating out-of-pattern entries as zero.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index_of(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Matrix–vector product `y = A·x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// Maximum sub-diagonal width `max_i (i − min_j)` of the pattern.
    pub fn lower_bandwidth(&self) -> usize {
        (0..self.n)
            .map(|i| {
                let lo = self.row_ptr[i];
                if self.row_ptr[i + 1] == lo {
                    0
                } else {
                    i - self.col_idx[lo].min(i)
                }
            })
            .max()
            .unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// Banded LDLᵀ
// ---------------------------------------------------------------------------

/// Symmetric banded matrix in lower-band, column-major storage:
/// `data[j·(hb+1) + r] = A[j+r][j]` for `r = 0..=hb`. After
/// [`BandLdlt::factor`], row 0 holds `D` and rows 1..=hb hold the unit-lower
/// factor `L`.
#[derive(Debug, Clone)]
pub struct BandLdlt {
    /// Dimension.
    pub n: usize,
    /// Half bandwidth (sub-diagonals).
    pub hb: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandLdlt {
    /// Allocates a zeroed band container.
    pub fn new(n: usize, hb: usize) -> Self {
        Self {
            n,
            hb,
            data: vec![0.0; n * (hb + 1)],
            factored: false,
        }
    }

    /// Copies the lower triangle of a CSR matrix into the band (entries
    /// outside the band must not exist — guaranteed for the Q2 pattern with
    /// row-major node numbering).
    pub fn fill_from(&mut self, a: &SparseOperator) {
        debug_assert_eq!(a.n, self.n);
        self.data.fill(0.0);
        self.factored = false;
        let ld = self.hb + 1;
        for i in 0..a.n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                if j <= i {
                    debug_assert!(i - j <= self.hb, "entry ({i}, {j}) outside band");
                    self.data[j * ld + (i - j)] = a.values[k];
                }
            }
        }
    }

    /// In-place LDLᵀ factorization (right-looking, cache-friendly within the
    /// band). Fails if a pivot is not strictly positive, which for the
    /// Crank-Nicolson system signals a non-SPD assembly rather than a
    /// numerically borderline matrix.
    pub fn factor(&mut self) -> Result<()> {
        let ld = self.hb + 1;
        let n = self.n;
        for j in 0..n {
            let m = self.hb.min(n - 1 - j);
            let d = self.data[j * ld];
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::SolverFailure {
                    step: 0,
                    reason: format!("non-positive pivot {d:e} at column {j} in LDLT"),
                });
            }
            let inv = 1.0 / d;
            // Normalize column j into L.
            for r in 1..=m {
                self.data[j * ld + r] *= inv;
            }
            // Trailing update: A[i][k] -= L[i][j]·L[k][j]·d for the band.
            for c in 1..=m {
                let f = self.data[j * ld + c] * d;
                let (head, tail) = self.data.split_at_mut((j + c) * ld);
                let col_j = &head[j * ld + c..j * ld + m + 1];
                let col_k = &mut tail[..m - c + 1];
                for (r2, dst) in col_k.iter_mut().enumerate() {
                    *dst -= f * col_j[r2];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A·x = b` in place using the stored factorization.
    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored, "solve called before factor");
        debug_assert_eq!(b.len(), self.n);
        let ld = self.hb + 1;
        let n = self.n;
        // Forward substitution with unit lower L.
        for j in 0..n {
            let m = self.hb.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for r in 1..=m {
                    b[j + r] -= self.data[j * ld + r] * bj;
                }
            }
        }
        // Diagonal scaling.
        for j in 0..n {
            b[j] /= self.data[j * ld];
        }
        // Backward substitution with Lᵀ.
        for j in (0..n).rev() {
            let m = self.hb.min(n - 1 - j);
            let mut acc = b[j];
            for r in 1..=m {
                acc -= self.data[j * ld + r] * b[j + r];
            }
            b[j] = acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Conjugate gradients
// ---------------------------------------------------------------------------

/// Jacobi-preconditioned conjugate gradient solve of `A·x = b` for symmetric
/// positive definite `A`; `x` carries the initial guess in and the solution
/// out. Converges when `‖b − A·x‖ ≤ tol·‖b‖`.
pub fn solve_cg(
    a: &SparseOperator,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = a.n;
    let mut diag_inv = vec![0.0; n];
    for i in 0..n {
        let d = a.get(i, i);
        if !(d.is_finite() && d != 0.0) {
            return Err(Error::SolverFailure {
                step: 0,
                reason: format!("zero/invalid diagonal {d:e} at row {i} in CG preconditioner"),
            });
        }
        diag_inv[i] = 1.0 / d;
    }

    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let target = tol * norm_b;

    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = (0..n).map(|i| diag_inv[i] * r[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    for iter in 0..max_iter {
        let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_r <= target {
            return Ok(iter);
        }
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap.is_finite() && pap > 0.0) {
            return Err(Error::SolverFailure {
                step: 0,
                reason: format!("CG curvature pᵀAp = {pap:e} not positive at iteration {iter}"),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = diag_inv[i] * r[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure {
        step: 0,
        reason: format!("CG did not reach relative residual {tol:e} within {max_iter} iterations"),
    })
}
