use rayon::prelude::*;

use super::SnapshotSet;
use crate::error::Result;
use crate::numerics::{cholesky, least_squares, vecops, DenseMatrix};

struct Fiber {
    /// Rows of the lower triangle of `VᵀG_jV`.
    h: Vec<Vec<f64>>,
    /// `VᵀG_j u_j`.
    b: Vec<f64>,
    err: f64,
}

/// Best-approximation errors `min_c ‖u_j − V c‖_{G_j}` for a growing shared
/// basis `V`, each snapshot measured in its own norm.
pub(crate) struct ProjectionTracker<'a> {
    snaps: &'a SnapshotSet,
    basis: Vec<Vec<f64>>,
    fibers: Vec<Fiber>,
}

impl<'a> ProjectionTracker<'a> {
    pub fn new(snaps: &'a SnapshotSet) -> Self {
        let fibers = (0..snaps.len())
            .map(|j| Fiber {
                h: Vec::new(),
                b: Vec::new(),
                err: snaps.norm(j),
            })
            .collect();
        ProjectionTracker {
            snaps,
            basis: Vec::new(),
            fibers,
        }
    }

    /// Absolute errors, one per snapshot.
    pub fn errors(&self) -> Vec<f64> {
        self.fibers.iter().map(|f| f.err).collect()
    }

    pub fn push(&mut self, v: Vec<f64>) -> Result<()> {
        let snaps = self.snaps;
        let basis = &self.basis;
        let updated: Vec<Result<(Vec<f64>, f64, f64)>> = self
            .fibers
            .par_iter()
            .enumerate()
            .map(|(j, fiber)| {
                let g = &snaps.grams[j];
                let w = g.matvec(&v)?;
                let mut row: Vec<f64> = basis.iter().map(|q| vecops::dot(q, &w)).collect();
                row.push(vecops::dot(&v, &w));
                let bj = vecops::dot(&w, &snaps.snapshots[j]);
                let mut h = fiber.h.clone();
                h.push(row.clone());
                let mut b = fiber.b.clone();
                b.push(bj);
                let err = best_error(&h, &b, basis, &v, g, &snaps.snapshots[j])?;
                Ok((row, bj, err))
            })
            .collect();
        for (fiber, r) in self.fibers.iter_mut().zip(updated) {
            let (row, bj, err) = r?;
            fiber.h.push(row);
            fiber.b.push(bj);
            fiber.err = err;
        }
        self.basis.push(v);
        Ok(())
    }
}

fn full(h: &[Vec<f64>]) -> DenseMatrix {
    let n = h.len();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            m[(i, j)] = h[i][j];
            m[(j, i)] = h[i][j];
        }
    }
    m
}

fn small_solve(h: &DenseMatrix, l: Option<&DenseMatrix>, rhs: &[f64]) -> Result<Vec<f64>> {
    match l {
        Some(l) => Ok(l.solve_lower_transpose(&l.solve_lower(rhs))),
        None => Ok(least_squares(h, rhs)?.x),
    }
}

fn combine(basis: &[Vec<f64>], last: &[f64], c: &[f64], u: &[f64]) -> Vec<f64> {
    let mut r = u.to_vec();
    let vectors = basis.iter().map(|q| q.as_slice()).chain(std::iter::once(last));
    for (q, &ck) in vectors.zip(c) {
        vecops::axpy(-ck, q, &mut r);
    }
    r
}

/// Normal equations with one step of iterative refinement, then the error of
/// the explicit residual.
fn best_error(
    h: &[Vec<f64>],
    b: &[f64],
    basis: &[Vec<f64>],
    last: &[f64],
    g: &crate::numerics::SparseMatrix,
    u: &[f64],
) -> Result<f64> {
    let hm = full(h);
    let l = cholesky(&hm).ok();
    let mut c = small_solve(&hm, l.as_ref(), b)?;
    let r = combine(basis, last, &c, u);
    let gr = g.matvec(&r)?;
    let mut corr_rhs: Vec<f64> = basis.iter().map(|q| vecops::dot(q, &gr)).collect();
    corr_rhs.push(vecops::dot(last, &gr));
    let dc = small_solve(&hm, l.as_ref(), &corr_rhs)?;
    for (ci, d) in c.iter_mut().zip(dc) {
        *ci += d;
    }
    let r = combine(basis, last, &c, u);
    Ok(g.quadratic(&r).max(0.0).sqrt())
}

/// Outcome of orthonormalizing one vector against a `G`-orthonormal set.
pub(crate) struct Orthogonalized {
    /// Coefficients along the existing vectors.
    pub coeffs: Vec<f64>,
    /// Norm of the component outside their span.
    pub norm: f64,
    /// The normalized component; `None` when it is numerically dependent.
    pub q: Option<Vec<f64>>,
}

/// Modified Gram–Schmidt in the `G` inner product with one
/// reorthogonalization pass. `gq` holds `G q_k` for every basis vector.
pub(crate) fn g_orthogonalize(
    v: &[f64],
    basis: &[Vec<f64>],
    gq: &[Vec<f64>],
    g: &crate::numerics::SparseMatrix,
    dep_tol: f64,
) -> Result<Orthogonalized> {
    let norm0 = g.quadratic(v).max(0.0).sqrt();
    let mut r = v.to_vec();
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (k, (q, w)) in basis.iter().zip(gq).enumerate() {
            let a = vecops::dot(w, &r);
            coeffs[k] += a;
            vecops::axpy(-a, q, &mut r);
        }
    }
    let norm = g.quadratic(&r).max(0.0).sqrt();
    let q = if norm > dep_tol * norm0 && norm > 0.0 {
        vecops::scale(1.0 / norm, &mut r);
        Some(r)
    } else {
        None
    };
    Ok(Orthogonalized { coeffs, norm, q })
}
