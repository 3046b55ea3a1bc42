use serde::{Deserialize, Serialize};

use crate::discretization::{boundary_matrices, check_shape, quadrature::gauss_legendre, DGSpace};
use crate::error::Result;
use crate::numerics::{svd, sym_eig, DenseMatrix};
use crate::system::FriedrichsSystem;

/// Largest system handled by the dense M1 eigenvalue check.
const M1_DENSE_LIMIT: usize = 1500;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub mu: Vec<f64>,
    /// Smallest eigenvalue of `M_h + M_hᵀ` restricted to boundary dofs.
    pub m1_min_eigenvalue: f64,
    pub m1_scale: f64,
    pub m1_pass: bool,
    /// Dimension of the broken boundary trace space.
    pub trace_dofs: usize,
    /// `rank[ker(D − M) | ker(D + M)]` in the trace space.
    pub m2_rank: usize,
    pub m2_pass: bool,
    pub pass: bool,
}

/// Face Legendre degrees along the tangential direction.
fn face_basis(k: usize, d: usize) -> Vec<usize> {
    if d == 1 {
        vec![0]
    } else {
        (0..=k).collect()
    }
}

fn null_space_dim_basis(a: &DenseMatrix) -> Result<Vec<Vec<f64>>> {
    let n = a.cols();
    let f = svd(a)?;
    let smax = f.s.first().copied().unwrap_or(0.0).max(1.0);
    let rank = f.s.iter().filter(|&&s| s > 1e-10 * smax).count();
    Ok((rank..n).map(|k| f.vt.row(k).to_vec()).collect())
}

/// M1 on the assembled boundary matrix and M2 in the space of broken
/// boundary traces: per boundary face the Galerkin matrices of `D̲ − M` and
/// `D̲ + M` are formed in a face Legendre basis and the union of their null
/// spaces must span the face trace space.
pub fn m_admissibility_check(
    sys: &FriedrichsSystem,
    space: &DGSpace,
    mu: &[f64],
) -> Result<AdmissibilityReport> {
    check_shape(sys, space, mu)?;
    let (_, mh) = boundary_matrices(sys, space, mu)?;

    // M1 on the rows that touch the boundary.
    let mut touched: Vec<usize> = mh
        .triplets()
        .flat_map(|(i, j, _)| [i, j])
        .collect();
    touched.sort_unstable();
    touched.dedup();
    let (m1_min, m1_scale) = if touched.is_empty() {
        (0.0, 0.0)
    } else if touched.len() <= M1_DENSE_LIMIT {
        let dense = mh.to_dense();
        let sub = dense.principal_submatrix(&touched);
        let sym = sub.add(&sub.transpose())?;
        (sym_eig(&sym.symmetric_part())?.min(), sym.max_abs())
    } else {
        // Cellwise blocks are independent: M_h is block diagonal.
        let bs = space.block();
        let dense_blocks = block_min_eig(&mh, bs)?;
        (dense_blocks.0, dense_blocks.1)
    };
    let m1_pass = m1_min >= -1e-10 * m1_scale.max(f64::MIN_POSITIVE);

    // M2 per boundary face.
    let d = space.d();
    let m = sys.m;
    let fb = face_basis(space.order(), d);
    let nf = fb.len() * m;
    let nq = space.order() + 2;
    let (gx, gw) = gauss_legendre(nq);
    let mut trace_dofs = 0;
    let mut m2_rank = 0;
    for face in space.mesh().boundary_faces() {
        let side = if face.upper { 1.0 } else { -1.0 };
        let n = face.normal(d);
        let mut dm = DenseMatrix::zeros(nf, nf);
        let mut mm = DenseMatrix::zeros(nf, nf);
        let points: Vec<(Vec<f64>, f64, f64)> = if d == 1 {
            vec![(vec![side], 1.0, 0.0)]
        } else {
            gx.iter()
                .zip(&gw)
                .map(|(&t, &w)| {
                    let mut xi = vec![0.0; 2];
                    xi[face.axis] = side;
                    xi[1 - face.axis] = t;
                    (xi, w, t)
                })
                .collect()
        };
        for (xi, w, t) in points {
            let x = space.mesh().map_to_physical(face.cell, &xi);
            let dface = sys.a[face.axis].eval(mu, &x).scaled(side);
            let mface = sys.boundary.eval(mu, &x, &n, &dface);
            let psi: Vec<f64> = fb.iter().map(|&a| if a == 0 { 1.0 } else { t }).collect();
            for r in 0..m {
                for s in 0..m {
                    for (a, pa) in psi.iter().enumerate() {
                        for (b, pb) in psi.iter().enumerate() {
                            let i = r * fb.len() + a;
                            let j = s * fb.len() + b;
                            dm[(i, j)] += w * dface[(r, s)] * pa * pb;
                            mm[(i, j)] += w * mface[(r, s)] * pa * pb;
                        }
                    }
                }
            }
        }
        let mut span = null_space_dim_basis(&dm.sub(&mm)?)?;
        span.extend(null_space_dim_basis(&dm.add(&mm)?)?);
        let rank = if span.is_empty() {
            0
        } else {
            let cols = DenseMatrix::from_columns(&span);
            svd(&cols)?.rank(1e-10)
        };
        trace_dofs += nf;
        m2_rank += rank;
    }
    let m2_pass = m2_rank == trace_dofs;
    Ok(AdmissibilityReport {
        mu: mu.to_vec(),
        m1_min_eigenvalue: m1_min,
        m1_scale,
        m1_pass,
        trace_dofs,
        m2_rank,
        m2_pass,
        pass: m1_pass && m2_pass,
    })
}

fn block_min_eig(mh: &crate::numerics::SparseMatrix, bs: usize) -> Result<(f64, f64)> {
    let n = mh.rows();
    let mut min = f64::INFINITY;
    let mut scale = 0.0_f64;
    for c in 0..n / bs {
        let mut blk = DenseMatrix::zeros(bs, bs);
        let mut any = false;
        for i in 0..bs {
            let (cols, vals) = mh.row(c * bs + i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= c * bs && j < (c + 1) * bs {
                    blk[(i, j - c * bs)] = v;
                    any = true;
                }
            }
        }
        if !any {
            continue;
        }
        let sym = blk.add(&blk.transpose())?;
        scale = scale.max(sym.max_abs());
        min = min.min(sym_eig(&sym.symmetric_part())?.min());
    }
    Ok((if min.is_finite() { min } else { 0.0 }, scale))
}
