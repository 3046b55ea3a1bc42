use super::{svd_with, DenseMatrix, Tolerances};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub rank: usize,
    /// Set when `a` is numerically rank deficient; `x` is then the
    /// minimum-norm minimizer.
    pub rank_deficient: bool,
}

pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<LeastSquares> {
    least_squares_with(a, b, &Tolerances::default())
}

/// Minimizes `‖a x − b‖₂` through the pseudo-inverse built from an SVD.
pub fn least_squares_with(a: &DenseMatrix, b: &[f64], tol: &Tolerances) -> Result<LeastSquares> {
    if a.rows() < a.cols() {
        return Err(Error::invalid(format!(
            "least_squares needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "least_squares rhs",
            expected: a.rows(),
            found: b.len(),
        });
    }
    let f = svd_with(a, tol)?;
    let rank = f.rank(tol.rank_rtol);
    let utb = f.u.tr_matvec(b)?;
    let mut x = vec![0.0; a.cols()];
    for k in 0..rank {
        let coef = utb[k] / f.s[k];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += coef * f.vt[(k, j)];
        }
    }
    let ax = a.matvec(&x)?;
    let residual_norm = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(LeastSquares {
        x,
        residual_norm,
        rank,
        rank_deficient: rank < a.cols(),
    })
}
