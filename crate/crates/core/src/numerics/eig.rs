use super::{DenseMatrix, Tolerances};
use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix. `values` ascend; column `k` of
/// `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    /// Spectral absolute value `V |Λ| Vᵀ`.
    pub fn abs_matrix(&self) -> DenseMatrix {
        self.spectral_map(f64::abs)
    }

    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.values.len();
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let fl = f(lam);
            if fl == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * fl;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

pub fn sym_eig(m: &DenseMatrix) -> Result<SymEig> {
    sym_eig_with(m, &Tolerances::default())
}

/// Cyclic Jacobi rotations.
pub fn sym_eig_with(m: &DenseMatrix, tol: &Tolerances) -> Result<SymEig> {
    m.check_symmetric(tol.symmetry_rtol)?;
    if !m.is_finite() {
        return Err(Error::NonFinite("sym_eig input".into()));
    }
    let n = m.rows();
    let mut a = m.symmetric_part();
    let mut v = DenseMatrix::identity(n);
    let total = a.frobenius_norm();
    let target = f64::EPSILON * total;

    let off = |a: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[(i, j)] * a[(i, j)];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > target {
        if sweeps >= tol.jacobi_max_sweeps {
            return Err(Error::NonConvergence {
                routine: "sym_eig",
                iterations: sweeps,
                detail: format!("off-diagonal norm {:e}", off(&a)),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, k)] = v[(i, j)];
        }
    }
    Ok(SymEig { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal() {
        let e = sym_eig(&DenseMatrix::from_diag(&[2.0, 5.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 5.0]);
    }

    #[test]
    fn swap_matrix() {
        // det([[−λ, 1], [1, −λ]]) = λ² − 1
        let e = sym_eig(&DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_all_ones() {
        let e = sym_eig(&DenseMatrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DenseMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn abs_matrix_of_indefinite() {
        let e = sym_eig(&DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let a = e.abs_matrix();
        assert!((a[(0, 0)] - 1.0).abs() < 1e-14 && a[(0, 1)].abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn residual_and_orthonormality(n in 1usize..8, vals in proptest::collection::vec(-4.0f64..4.0, 64)) {
            let mut m = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    m[(i, j)] = vals[i * 8 + j];
                    m[(j, i)] = vals[i * 8 + j];
                }
            }
            let e = sym_eig(&m).unwrap();
            let norm = m.frobenius_norm().max(1e-300);
            for w in e.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
            prop_assert!(vtv.sub(&DenseMatrix::identity(n)).unwrap().max_abs() <= 1e-10);
            for k in 0..n {
                let vk = e.vectors.column(k);
                let mv = m.matvec(&vk).unwrap();
                let r: f64 = mv.iter().zip(&vk).map(|(a, b)| (a - e.values[k] * b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(r <= 1e-10 * norm);
            }
        }
    }
}
