//! Dense and sparse linear-algebra kernels.
//!
//! Everything here is self-contained: a row-major [`DenseMatrix`], a CSR
//! [`SparseMatrix`], Golub–Reinsch SVD, cyclic Jacobi for symmetric
//! eigenproblems, Cholesky, SVD-backed least squares and a left-looking
//! sparse LU with threshold partial pivoting. All routines are pure
//! functions of their inputs.

mod dense;
mod eig;
mod lstsq;
mod lu;
mod sparse;
mod svd;
pub mod vecops;

pub use dense::{cholesky, cholesky_with, DenseMatrix};
pub use eig::{sym_eig, sym_eig_with, SymEig};
pub use lstsq::{least_squares, least_squares_with, LeastSquares};
pub use lu::{sparse_solve, sparse_solve_with, SparseLu};
pub use sparse::{SparseMatrix, TripletBuilder};
pub use svd::{svd, svd_with, Svd};

/// Fixed numerical tolerances; every routine has a `_with` variant taking
/// an explicit copy.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative asymmetry accepted by symmetric routines.
    pub symmetry_rtol: f64,
    /// Pivots below `pivot_rtol * max|a|` are treated as zero.
    pub pivot_rtol: f64,
    /// Diagonal entry is kept as pivot when it is within this factor of the
    /// largest candidate.
    pub pivot_threshold: f64,
    /// Singular values below `rank_rtol * s_max` count as zero.
    pub rank_rtol: f64,
    pub svd_max_iterations: usize,
    pub jacobi_max_sweeps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry_rtol: 1e-12,
            pivot_rtol: 1e-14,
            pivot_threshold: 0.1,
            rank_rtol: 1e-12,
            svd_max_iterations: 75,
            jacobi_max_sweeps: 100,
        }
    }
}
