//! Left-looking sparse LU (Gilbert–Peierls) with threshold partial pivoting.
//!
//! Columns are processed in natural order. For column `k` the nonzero
//! pattern of `L⁻¹ a_k` is found by a depth-first search through the
//! already factored columns of `L`, the sparse triangular solve is done in
//! topological order, and the pivot is chosen among rows that are not yet
//! pivotal.

use super::{vecops, SparseMatrix, Tolerances};
use crate::error::{Error, Result};

const UNSET: usize = usize::MAX;

/// `P A = L U` with `L` unit lower triangular (diagonal stored first in each
/// column) and `U` upper triangular (diagonal stored last). Row indices of
/// both factors are in pivot order.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// `perm[k]` is the original row chosen as pivot `k`.
    perm: Vec<usize>,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        Self::factor_with(a, &Tolerances::default())
    }

    pub fn factor_with(a: &SparseMatrix, tol: &Tolerances) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                context: "sparse LU (square matrix)",
                expected: a.rows(),
                found: a.cols(),
            });
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("sparse LU input".into()));
        }
        let n = a.rows();
        // CSR of Aᵀ is CSC of A.
        let at = a.transpose();
        let (cp, ci, cv) = at.parts();
        let zero_tol = tol.pivot_rtol * a.max_abs();

        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut l_idx = Vec::with_capacity(4 * a.nnz());
        let mut l_val = Vec::with_capacity(4 * a.nnz());
        let mut u_ptr = Vec::with_capacity(n + 1);
        let mut u_idx = Vec::with_capacity(4 * a.nnz());
        let mut u_val = Vec::with_capacity(4 * a.nnz());

        let mut pinv = vec![UNSET; n];
        let mut x = vec![0.0; n];
        let mut mark = vec![UNSET; n];
        let mut post: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
            let (rows, vals) = (&ci[cp[k]..cp[k + 1]], &cv[cp[k]..cp[k + 1]]);

            // Symbolic: reach of the column's pattern in the graph of L.
            post.clear();
            for &start in rows {
                if mark[start] == k {
                    continue;
                }
                mark[start] = k;
                stack.push((start, child_start(&pinv, &l_ptr, start)));
                while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
                    let j = pinv[node];
                    let end = if j == UNSET { 0 } else { col_end(&l_ptr, l_idx.len(), j) };
                    let mut next = None;
                    while *pos < end {
                        let child = l_idx[*pos];
                        *pos += 1;
                        if mark[child] != k {
                            next = Some(child);
                            break;
                        }
                    }
                    match next {
                        Some(child) => {
                            mark[child] = k;
                            stack.push((child, child_start(&pinv, &l_ptr, child)));
                        }
                        None => {
                            stack.pop();
                            post.push(node);
                        }
                    }
                }
            }

            // Numeric: sparse triangular solve in topological order.
            for (&r, &v) in rows.iter().zip(vals) {
                x[r] = v;
            }
            for &i in post.iter().rev() {
                let j = pinv[i];
                if j == UNSET {
                    continue;
                }
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                // skip the unit diagonal stored first
                let (a0, a1) = (l_ptr[j] + 1, col_end(&l_ptr, l_idx.len(), j));
                for p in a0..a1 {
                    x[l_idx[p]] -= l_val[p] * xi;
                }
            }

            // Pivot selection.
            let mut best = UNSET;
            let mut best_abs = -1.0_f64;
            for &i in post.iter().rev() {
                if pinv[i] == UNSET {
                    let v = x[i].abs();
                    if v > best_abs || (v == best_abs && i < best) {
                        best_abs = v;
                        best = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if best == UNSET || best_abs <= zero_tol || !best_abs.is_finite() {
                return Err(Error::Singular {
                    column: k,
                    magnitude: best_abs.max(0.0),
                });
            }
            if pinv[k] == UNSET && mark[k] == k && x[k].abs() >= tol.pivot_threshold * best_abs {
                best = k;
            }
            let pivot = x[best];
            pinv[best] = k;
            u_idx.push(k);
            u_val.push(pivot);
            l_idx.push(best);
            l_val.push(1.0);
            for &i in post.iter().rev() {
                if pinv[i] == UNSET {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());

        // Renumber L rows into pivot order.
        for r in &mut l_idx {
            *r = pinv[*r];
        }
        let mut perm = vec![0; n];
        for (row, &k) in pinv.iter().enumerate() {
            perm[k] = row;
        }
        Ok(Self {
            n,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            perm,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "sparse LU solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&r| b[r]).collect();
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in (self.l_ptr[j] + 1)..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for j in (0..self.n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            x[j] /= self.u_val[last];
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.u_ptr[j]..last {
                x[self.u_idx[p]] -= self.u_val[p] * xj;
            }
        }
        Ok(x)
    }
}

#[inline]
fn child_start(pinv: &[usize], l_ptr: &[usize], node: usize) -> usize {
    match pinv[node] {
        UNSET => 0,
        j => l_ptr[j],
    }
}

#[inline]
fn col_end(l_ptr: &[usize], len: usize, j: usize) -> usize {
    if j + 1 < l_ptr.len() {
        l_ptr[j + 1]
    } else {
        len
    }
}

pub fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    sparse_solve_with(a, b, &Tolerances::default())
}

/// Factor-and-solve with one step of iterative refinement.
pub fn sparse_solve_with(a: &SparseMatrix, b: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "sparse_solve rhs",
            expected: a.rows(),
            found: b.len(),
        });
    }
    let lu = SparseLu::factor_with(a, tol)?;
    let mut x = lu.solve(b)?;
    let ax = a.matvec(&x)?;
    let r = vecops::sub(b, &ax);
    let dx = lu.solve(&r)?;
    vecops::axpy(1.0, &dx, &mut x);
    if !vecops::all_finite(&x) {
        return Err(Error::NonFinite("sparse_solve solution".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{DenseMatrix, TripletBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x).unwrap();
        vecops::norm2(&vecops::sub(&ax, b)) / vecops::norm2(b)
    }

    #[test]
    fn identity() {
        let x = sparse_solve(&SparseMatrix::identity(2), &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn diagonal() {
        let x = sparse_solve(&SparseMatrix::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn upwind_recursion_four_cells() {
        // u' + u = 1, u(0) = 0, k = 0 upwind on 4 cells of width h:
        // (h + 1) u_j - u_{j-1} = h  ->  u_j = (u_{j-1} + h) / (1 + h)
        let h = 0.25;
        let mut b = TripletBuilder::new(4, 4);
        for j in 0..4 {
            b.push(j, j, h + 1.0);
            if j > 0 {
                b.push(j, j - 1, -1.0);
            }
        }
        let a = b.finalize();
        let x = sparse_solve(&a, &[h; 4]).unwrap();
        let mut prev = 0.0;
        for xj in x {
            let want = (prev + h) / (1.0 + h);
            assert!((xj - want).abs() < 1e-15);
            prev = want;
        }
    }

    #[test]
    fn needs_row_exchange() {
        let d = DenseMatrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 2.0], &[0.0, 3.0, 1.0]]);
        let a = SparseMatrix::from_dense(&d);
        let b = [1.0, 2.0, 3.0];
        let x = sparse_solve(&a, &b).unwrap();
        assert!(rel_residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let d = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let r = sparse_solve(&SparseMatrix::from_dense(&d), &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::Singular { column: 1, .. })));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(sparse_solve(&SparseMatrix::identity(3), &[1.0]).is_err());
        assert!(SparseLu::factor(&SparseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn random_well_conditioned_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let n = 5 + trial % 40;
            let mut b = TripletBuilder::new(n, n);
            for i in 0..n {
                let mut rowsum = 0.0;
                for _ in 0..4 {
                    let j = rng.random_range(0..n);
                    if j != i {
                        let v: f64 = rng.random_range(-1.0..1.0);
                        rowsum += v.abs();
                        b.push(i, j, v);
                    }
                }
                // sometimes weak diagonal, forcing pivoting
                let scale = if trial % 3 == 0 { 0.05 } else { 1.5 };
                b.push(i, i, scale * (rowsum + 1.0));
            }
            let a = b.finalize();
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            match sparse_solve(&a, &rhs) {
                Ok(x) => assert!(rel_residual(&a, &x, &rhs) <= 1e-10, "trial {trial}"),
                Err(Error::Singular { .. }) if trial % 3 == 0 => {}
                Err(e) => panic!("trial {trial}: {e}"),
            }
        }
    }

    #[test]
    fn deterministic() {
        let d = DenseMatrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 2.0]]);
        let a = SparseMatrix::from_dense(&d);
        let x1 = sparse_solve(&a, &[1.0, 0.0, 1.0]).unwrap();
        let x2 = sparse_solve(&a, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(x1, x2);
    }
}
