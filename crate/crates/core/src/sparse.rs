//! Compressed sparse row matrices sharing the sparsity of a finite element
//! mesh, and a Jacobi-preconditioned conjugate gradient solver.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::surface_mesh::SurfaceMesh;

/// Symmetric CSR sparsity of the node-to-node coupling of a mesh, together
/// with the scatter map from element-local entries to value slots.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    n_loc: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Slot of local entry (a, b) of element e at `e·n_loc² + a·n_loc + b`.
    element_slots: Vec<usize>,
}

impl SparsityPattern {
    pub fn from_mesh(mesh: &SurfaceMesh) -> Self {
        let n = mesh.n_nodes();
        let n_loc = mesh.n_loc();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in mesh.elements() {
            for &i in el {
                rows[i].extend_from_slice(el);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let mut element_slots = Vec::with_capacity(mesh.n_elements() * n_loc * n_loc);
        for el in mesh.elements() {
            for &i in el {
                let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                for &j in el {
                    let k = cols.binary_search(&j).expect("pattern contains element couplings");
                    element_slots.push(row_ptr[i] + k);
                }
            }
        }
        Self {
            n,
            n_loc,
            row_ptr,
            col_idx,
            element_slots,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub(crate) fn element_slots(&self, e: usize) -> &[usize] {
        let s = self.n_loc * self.n_loc;
        &self.element_slots[e * s..(e + 1) * s]
    }
}

/// A symmetric matrix stored in full CSR form on a shared pattern.
#[derive(Clone, Debug)]
pub struct SparseSymmetricMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseSymmetricMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        Self {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds an element-local `n_loc × n_loc` matrix (row-major).
    pub(crate) fn add_element(&mut self, e: usize, local: &[f64]) {
        for (&slot, &v) in self.pattern.element_slots(e).iter().zip(local) {
            self.values[slot] += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let p = &self.pattern;
        let cols = &p.col_idx[p.row_ptr[i]..p.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[p.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Applies `I_d ⊗ self` to a blocked vector of `d` components.
    pub fn mul_lifted(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; x.len()];
        for (xc, yc) in x.chunks_exact(n).zip(y.chunks_exact_mut(n)) {
            self.mul_vec_into(xc, yc);
        }
        y
    }

    /// `a·self + b·other`; both must share the same pattern.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern));
        Self {
            pattern: Arc::clone(&self.pattern),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// Largest |a_ij − a_ji| relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let p = &self.pattern;
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Ratio of extreme Ritz values of the preconditioned operator, a proxy
    /// for its condition number. 1 when no iteration was needed.
    pub ritz_ratio: f64,
}

/// Jacobi-preconditioned conjugate gradients for one SPD matrix; the
/// preconditioner is built once and shared by all right-hand sides.
pub struct PcgSolver<'a> {
    matrix: &'a SparseSymmetricMatrix,
    inv_diag: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl<'a> PcgSolver<'a> {
    pub fn new(matrix: &'a SparseSymmetricMatrix, tol: f64, max_iter: usize) -> Result<Self> {
        let inv_diag = matrix
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { Ok(1.0 / d) } else { Err(Error::NonFinite("non-positive diagonal")) })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            matrix,
            inv_diag,
            tol,
            max_iter,
        })
    }

    pub fn solve(&self, rhs: &[f64], guess: Option<&[f64]>) -> Result<(Vec<f64>, LinearSolveReport)> {
        let n = self.matrix.n();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        if !rhs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("linear system right-hand side"));
        }
        let b_norm = norm(rhs);
        if b_norm == 0.0 {
            return Ok((
                vec![0.0; n],
                LinearSolveReport {
                    iterations: 0,
                    relative_residual: 0.0,
                    ritz_ratio: 1.0,
                },
            ));
        }
        let mut x = match guess {
            Some(g) if g.len() == n && g.iter().all(|v| v.is_finite()) => g.to_vec(),
            _ => vec![0.0; n],
        };
        let residual_of = |x: &[f64]| -> Vec<f64> {
            let ax = self.matrix.mul_vec(x);
            rhs.iter().zip(ax).map(|(b, a)| b - a).collect()
        };
        let mut r = residual_of(&x);
        let mut rel = norm(&r) / b_norm;
        let mut lanczos = Lanczos::default();
        let mut it = 0;
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        while rel > self.tol {
            if it >= self.max_iter {
                return Err(Error::SolverNotConverged {
                    iterations: it,
                    residual: rel,
                });
            }
            it += 1;
            self.matrix.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NonFinite("conjugate gradient curvature"));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * self.inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            lanczos.push(alpha, beta);
            rz = rz_new;
            rel = norm(&r) / b_norm;
            if rel <= self.tol {
                // guard against drift of the recursive residual
                r = residual_of(&x);
                rel = norm(&r) / b_norm;
                if rel > self.tol {
                    z = r.iter().zip(&self.inv_diag).map(|(r, d)| r * d).collect();
                    rz = dot(&r, &z);
                    p.copy_from_slice(&z);
                    continue;
                }
                break;
            }
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            if !rel.is_finite() {
                return Err(Error::NonFinite("conjugate gradient residual"));
            }
        }
        Ok((
            x,
            LinearSolveReport {
                iterations: it,
                relative_residual: rel,
                ritz_ratio: lanczos.ritz_ratio(),
            },
        ))
    }
}

/// Convenience wrapper: one solve with a fresh preconditioner.
pub fn solve_spd(
    matrix: &SparseSymmetricMatrix,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    PcgSolver::new(matrix, tol, max_iter)?.solve(rhs, None)
}

/// Lanczos tridiagonal matrix recovered from the CG coefficients.
#[derive(Default)]
struct Lanczos {
    diag: Vec<f64>,
    off: Vec<f64>,
    prev: Option<(f64, f64)>,
}

impl Lanczos {
    fn push(&mut self, alpha: f64, beta: f64) {
        let d = match self.prev {
            None => 1.0 / alpha,
            Some((a_prev, b_prev)) => {
                self.off.push(b_prev.sqrt() / a_prev);
                1.0 / alpha + b_prev / a_prev
            }
        };
        self.diag.push(d);
        self.prev = Some((alpha, beta));
    }

    /// Number of eigenvalues of the tridiagonal matrix below `x`.
    fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let off2 = if i == 0 { 0.0 } else { self.off[i - 1].powi(2) };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { off2 / q };
            if q == 0.0 {
                q = 1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn eigenvalue(&self, index: usize, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn ritz_ratio(&self) -> f64 {
        let m = self.diag.len();
        if m == 0 {
            return 1.0;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let r = (if i > 0 { self.off[i - 1].abs() } else { 0.0 })
                + (if i + 1 < m { self.off[i].abs() } else { 0.0 });
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        let lmin = self.eigenvalue(0, lo, hi);
        let lmax = self.eigenvalue(m - 1, lo, hi);
        if lmin > 0.0 {
            lmax / lmin
        } else {
            f64::INFINITY
        }
    }
}
