use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on a box. Cells are numbered with the first axis
/// varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredMesh {
    cells: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    periodic: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteriorFace {
    /// Cell on the lower side; the face normal points from `minus` to `plus`.
    pub minus: usize,
    pub plus: usize,
    pub axis: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub axis: usize,
    /// `true` on the upper end of `axis` (outward normal `+e_axis`).
    pub upper: bool,
}

impl BoundaryFace {
    pub fn normal(&self, d: usize) -> Vec<f64> {
        let mut n = vec![0.0; d];
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }
}

impl StructuredMesh {
    pub fn new(cells: Vec<usize>, domain: &[(f64, f64)], periodic: Vec<bool>) -> Result<Self> {
        let d = cells.len();
        if !(1..=2).contains(&d) {
            return Err(Error::Unsupported(format!("mesh dimension {d}")));
        }
        if domain.len() != d || periodic.len() != d {
            return Err(Error::DimensionMismatch {
                context: "mesh axes",
                expected: d,
                found: domain.len().min(periodic.len()),
            });
        }
        if cells.iter().any(|&n| n == 0) {
            return Err(Error::invalid("mesh needs at least one cell per axis"));
        }
        for &(a, b) in domain {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::invalid(format!("degenerate mesh interval [{a}, {b}]")));
            }
        }
        let mesh = Self {
            lower: domain.iter().map(|p| p.0).collect(),
            upper: domain.iter().map(|p| p.1).collect(),
            cells,
            periodic,
        };
        if !(mesh.cell_volume() > 0.0) {
            return Err(Error::invalid("cell volume underflows"));
        }
        Ok(mesh)
    }

    /// Non-periodic grid with `n` cells per axis.
    pub fn uniform(n: usize, domain: &[(f64, f64)]) -> Result<Self> {
        Self::new(vec![n; domain.len()], domain, vec![false; domain.len()])
    }

    pub fn d(&self) -> usize {
        self.cells.len()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.lower.iter().copied().zip(self.upper.iter().copied()).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn h(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d()).map(|i| self.h(i)).product()
    }

    pub fn cell_multi(&self, c: usize) -> Vec<usize> {
        let mut rest = c;
        self.cells
            .iter()
            .map(|&n| {
                let i = rest % n;
                rest /= n;
                i
            })
            .collect()
    }

    pub fn cell_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (i, &n) in multi.iter().zip(&self.cells) {
            idx += i * stride;
            stride *= n;
        }
        idx
    }

    /// Physical point of reference coordinate `xi ∈ [-1, 1]^d` in cell `c`.
    pub fn map_to_physical(&self, c: usize, xi: &[f64]) -> Vec<f64> {
        self.cell_multi(c)
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                let h = self.h(a);
                self.lower[a] + (i as f64 + 0.5 * (xi[a] + 1.0)) * h
            })
            .collect()
    }

    pub fn cell_center(&self, c: usize) -> Vec<f64> {
        self.map_to_physical(c, &vec![0.0; self.d()])
    }

    /// Cell containing `x` and the reference coordinate of `x` in it. Points
    /// on a shared face go to the upper cell; periodic axes wrap.
    pub fn locate(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                context: "mesh point",
                expected: self.d(),
                found: x.len(),
            });
        }
        let mut multi = Vec::with_capacity(self.d());
        let mut xi = Vec::with_capacity(self.d());
        for a in 0..self.d() {
            let len = self.upper[a] - self.lower[a];
            let mut t = x[a] - self.lower[a];
            if self.periodic[a] {
                t = t.rem_euclid(len);
            } else if t < -1e-12 * len || t > len * (1.0 + 1e-12) {
                return Err(Error::invalid(format!("point {x:?} lies outside the mesh")));
            }
            let h = self.h(a);
            let i = ((t / h).floor().max(0.0) as usize).min(self.cells[a] - 1);
            multi.push(i);
            xi.push(2.0 * (t / h - i as f64) - 1.0);
        }
        Ok((self.cell_index(&multi), xi))
    }

    pub fn interior_faces(&self) -> Vec<InteriorFace> {
        let mut out = Vec::new();
        for c in 0..self.n_cells() {
            let multi = self.cell_multi(c);
            for axis in 0..self.d() {
                let n = self.cells[axis];
                let next = if multi[axis] + 1 < n {
                    multi[axis] + 1
                } else if self.periodic[axis] {
                    0
                } else {
                    continue;
                };
                let mut nb = multi.clone();
                nb[axis] = next;
                out.push(InteriorFace {
                    minus: c,
                    plus: self.cell_index(&nb),
                    axis,
                });
            }
        }
        out
    }

    pub fn boundary_faces(&self) -> Vec<BoundaryFace> {
        let mut out = Vec::new();
        for c in 0..self.n_cells() {
            let multi = self.cell_multi(c);
            for axis in 0..self.d() {
                if self.periodic[axis] {
                    continue;
                }
                if multi[axis] == 0 {
                    out.push(BoundaryFace {
                        cell: c,
                        axis,
                        upper: false,
                    });
                }
                if multi[axis] + 1 == self.cells[axis] {
                    out.push(BoundaryFace {
                        cell: c,
                        axis,
                        upper: true,
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_counts() {
        let m = StructuredMesh::uniform(3, &[(0.0, 1.0), (0.0, 2.0)]).unwrap();
        assert_eq!(m.n_cells(), 9);
        assert_eq!(m.interior_faces().len(), 12);
        assert_eq!(m.boundary_faces().len(), 12);
        let p = StructuredMesh::new(vec![4], &[(0.0, 1.0)], vec![true]).unwrap();
        assert_eq!(p.interior_faces().len(), 4);
        assert!(p.boundary_faces().is_empty());
    }

    #[test]
    fn locate_round_trip() {
        let m = StructuredMesh::uniform(4, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        for c in 0..m.n_cells() {
            let x = m.map_to_physical(c, &[0.2, -0.6]);
            let (c2, xi) = m.locate(&x).unwrap();
            assert_eq!(c, c2);
            assert!((xi[0] - 0.2).abs() < 1e-12 && (xi[1] + 0.6).abs() < 1e-12);
        }
        assert!(m.locate(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn rejects_empty_axis() {
        assert!(StructuredMesh::uniform(0, &[(0.0, 1.0)]).is_err());
        assert!(StructuredMesh::uniform(2, &[(1.0, 1.0)]).is_err());
    }
}
