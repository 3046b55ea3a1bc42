use serde::{Deserialize, Serialize};

use super::quadrature::tensor_rule;
use super::StructuredMesh;
use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

/// Discontinuous tensor-Legendre space of order `k ∈ {0, 1}` with `m`
/// components. Degrees of freedom are numbered
/// `cell · (nb·m) + component · nb + basis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DGSpace {
    mesh: StructuredMesh,
    k: usize,
    m: usize,
}

pub fn build_space(mesh: StructuredMesh, k: usize, m: usize) -> Result<DGSpace> {
    if k > 1 {
        return Err(Error::Unsupported(format!("polynomial order {k}; only 0 and 1")));
    }
    if m == 0 {
        return Err(Error::invalid("state dimension must be positive"));
    }
    Ok(DGSpace { mesh, k, m })
}

#[inline]
fn legendre(a: usize, t: f64) -> f64 {
    if a == 0 {
        1.0
    } else {
        t
    }
}

#[inline]
fn legendre_derivative(a: usize) -> f64 {
    if a == 0 {
        0.0
    } else {
        1.0
    }
}

impl DGSpace {
    pub fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.mesh.d()
    }

    /// Scalar basis functions per cell, `(k+1)^d`.
    pub fn nb(&self) -> usize {
        (self.k + 1).pow(self.d() as u32)
    }

    /// Degrees of freedom per cell.
    pub fn block(&self) -> usize {
        self.nb() * self.m
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_cells() * self.block()
    }

    #[inline]
    pub fn dof(&self, cell: usize, comp: usize, basis: usize) -> usize {
        cell * self.block() + comp * self.nb() + basis
    }

    /// Per-axis Legendre degrees of basis function `b`.
    pub fn basis_degrees(&self, b: usize) -> Vec<usize> {
        let k1 = self.k + 1;
        let mut rest = b;
        (0..self.d())
            .map(|_| {
                let a = rest % k1;
                rest /= k1;
                a
            })
            .collect()
    }

    pub fn basis_value(&self, b: usize, xi: &[f64]) -> f64 {
        self.basis_degrees(b)
            .iter()
            .zip(xi)
            .map(|(&a, &t)| legendre(a, t))
            .product()
    }

    /// Gradient with respect to reference coordinates.
    pub fn basis_grad_ref(&self, b: usize, xi: &[f64]) -> Vec<f64> {
        let deg = self.basis_degrees(b);
        (0..self.d())
            .map(|i| {
                deg.iter()
                    .zip(xi)
                    .enumerate()
                    .map(|(j, (&a, &t))| if i == j { legendre_derivative(a) } else { legendre(a, t) })
                    .product()
            })
            .collect()
    }

    /// `∫_{[-1,1]^d} φ_b²`.
    pub fn basis_norm2_ref(&self, b: usize) -> f64 {
        self.basis_degrees(b)
            .iter()
            .map(|&a| 2.0 / (2 * a + 1) as f64)
            .product()
    }

    /// Jacobian of the reference map.
    pub fn jacobian(&self) -> f64 {
        self.mesh.cell_volume() / 2f64.powi(self.d() as i32)
    }

    /// Diagonal L² mass matrix.
    pub fn mass_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_diag(&self.mass_diagonal())
    }

    pub fn mass_diagonal(&self) -> Vec<f64> {
        let jac = self.jacobian();
        let per_cell: Vec<f64> = (0..self.m)
            .flat_map(|_| (0..self.nb()).map(|b| jac * self.basis_norm2_ref(b)))
            .collect();
        (0..self.mesh.n_cells()).flat_map(|_| per_cell.iter().copied()).collect()
    }

    /// Cellwise L² projection of `f` using `nq` Gauss points per axis.
    pub fn project(&self, f: &dyn Fn(&[f64]) -> Vec<f64>, nq: usize) -> Vec<f64> {
        let (pts, wts) = tensor_rule(self.d(), nq);
        let mut u = vec![0.0; self.n_dofs()];
        let norms: Vec<f64> = (0..self.nb()).map(|b| self.basis_norm2_ref(b)).collect();
        let phi: Vec<Vec<f64>> = pts
            .iter()
            .map(|xi| (0..self.nb()).map(|b| self.basis_value(b, xi)).collect())
            .collect();
        for c in 0..self.mesh.n_cells() {
            for (q, xi) in pts.iter().enumerate() {
                let x = self.mesh.map_to_physical(c, xi);
                let fx = f(&x);
                assert_eq!(fx.len(), self.m, "projected field has wrong component count");
                for (r, &fr) in fx.iter().enumerate() {
                    for b in 0..self.nb() {
                        u[self.dof(c, r, b)] += wts[q] * fr * phi[q][b] / norms[b];
                    }
                }
            }
        }
        u
    }

    /// Value of the discrete field at reference point `xi` of `cell`.
    pub fn eval_in_cell(&self, u: &[f64], cell: usize, xi: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|r| {
                (0..self.nb())
                    .map(|b| u[self.dof(cell, r, b)] * self.basis_value(b, xi))
                    .sum()
            })
            .collect()
    }

    pub fn evaluate(&self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let (c, xi) = self.mesh.locate(x)?;
        Ok(self.eval_in_cell(u, c, &xi))
    }

    /// `‖u_h − g‖_{L²}` by Gauss quadrature with `nq` points per axis.
    pub fn l2_error(&self, u: &[f64], g: &dyn Fn(&[f64]) -> Vec<f64>, nq: usize) -> f64 {
        let (pts, wts) = tensor_rule(self.d(), nq);
        let jac = self.jacobian();
        let mut s = 0.0;
        for c in 0..self.mesh.n_cells() {
            for (xi, w) in pts.iter().zip(&wts) {
                let x = self.mesh.map_to_physical(c, xi);
                let uh = self.eval_in_cell(u, c, xi);
                let ex = g(&x);
                s += w * jac * uh.iter().zip(&ex).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
        s.sqrt()
    }

    /// Number of mesh vertices per axis (periodic axes do not repeat the
    /// closing vertex).
    pub fn vertex_counts(&self) -> Vec<usize> {
        self.mesh
            .cells_per_axis()
            .iter()
            .zip(self.mesh.periodic())
            .map(|(&n, &p)| if p { n } else { n + 1 })
            .collect()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_counts().iter().product()
    }

    /// Globally continuous field from vertex values (component-major:
    /// `nodal[comp * n_vertices + vertex]`), multilinear in each cell.
    /// Requires `k = 1`.
    pub fn continuous_field(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        if self.k != 1 {
            return Err(Error::Unsupported("continuous fields need k = 1".into()));
        }
        let nv = self.n_vertices();
        if nodal.len() != nv * self.m {
            return Err(Error::DimensionMismatch {
                context: "continuous_field nodal values",
                expected: nv * self.m,
                found: nodal.len(),
            });
        }
        let counts = self.vertex_counts();
        let cells = self.mesh.cells_per_axis().to_vec();
        let d = self.d();
        let mut u = vec![0.0; self.n_dofs()];
        for c in 0..self.mesh.n_cells() {
            let multi = self.mesh.cell_multi(c);
            for corner in 0..(1usize << d) {
                let mut vidx = 0;
                let mut stride = 1;
                for a in 0..d {
                    let up = (corner >> a) & 1;
                    let mut i = multi[a] + up;
                    if i == cells[a] && self.mesh.periodic()[a] {
                        i = 0;
                    }
                    vidx += i * stride;
                    stride *= counts[a];
                }
                for b in 0..self.nb() {
                    let deg = self.basis_degrees(b);
                    let coef: f64 = (0..d)
                        .map(|a| {
                            let up = (corner >> a) & 1 == 1;
                            match (deg[a], up) {
                                (0, _) => 0.5,
                                (_, true) => 0.5,
                                (_, false) => -0.5,
                            }
                        })
                        .product();
                    for r in 0..self.m {
                        u[self.dof(c, r, b)] += coef * nodal[r * nv + vidx];
                    }
                }
            }
        }
        Ok(u)
    }
}
