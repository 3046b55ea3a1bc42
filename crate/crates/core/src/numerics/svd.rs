//! Golub–Reinsch SVD: Householder bidiagonalization followed by implicitly
//! shifted QR sweeps on the bidiagonal.

use super::{DenseMatrix, Tolerances};
use crate::error::{Error, Result};

/// Thin SVD `m = u · diag(s) · vt` with `s` non-negative and non-increasing.
/// For an `r × c` input, `u` is `r × k`, `vt` is `k × c`, `k = min(r, c)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub vt: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.s.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.vt).expect("consistent svd shapes")
    }

    /// Number of singular values above `rtol * s_max`.
    pub fn rank(&self, rtol: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&s| s > rtol * smax && s > 0.0).count()
    }
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    svd_with(m, &Tolerances::default())
}

pub fn svd_with(m: &DenseMatrix, tol: &Tolerances) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(m.rows(), 0),
            s: Vec::new(),
            vt: DenseMatrix::zeros(0, m.cols()),
        });
    }
    if m.rows() >= m.cols() {
        let (u, s, v) = golub_reinsch(m.clone(), tol.svd_max_iterations)?;
        Ok(sorted(u, s, v))
    } else {
        // m = (mᵀ)ᵀ = (U S Vᵀ)ᵀ = V S Uᵀ
        let (u, s, v) = golub_reinsch(m.transpose(), tol.svd_max_iterations)?;
        let out = sorted(u, s, v);
        Ok(Svd {
            u: out.vt.transpose(),
            s: out.s,
            vt: out.u.transpose(),
        })
    }
}

fn sorted(u: DenseMatrix, s: Vec<f64>, v: DenseMatrix) -> Svd {
    let n = s.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut uo = DenseMatrix::zeros(u.rows(), n);
    let mut vt = DenseMatrix::zeros(n, v.rows());
    let mut so = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        so.push(s[j]);
        for i in 0..u.rows() {
            uo[(i, k)] = u[(i, j)];
        }
        for i in 0..v.rows() {
            vt[(k, i)] = v[(i, j)];
        }
    }
    Svd { u: uo, s: so, vt }
}

#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Requires `rows >= cols`. Returns thin `U` (rows × cols), `s`, and `V`
/// (cols × cols) with `a = U diag(s) Vᵀ`.
fn golub_reinsch(mut a: DenseMatrix, max_iter: usize) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);
    let mut w = vec![0.0; n];
    let mut v = DenseMatrix::zeros(n, n);
    let mut rv1 = vec![0.0; n];
    let (mut g, mut scale, mut anorm) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut l = 0usize;

    // Householder reduction to upper bidiagonal form.
    for i in 0..n {
        l = i + 1;
        rv1[i] = scale * g;
        g = 0.0;
        scale = 0.0;
        let mut s;
        for k in i..m {
            scale += a[(k, i)].abs();
        }
        if scale != 0.0 {
            s = 0.0;
            for k in i..m {
                a[(k, i)] /= scale;
                s += a[(k, i)] * a[(k, i)];
            }
            let f = a[(i, i)];
            g = -sign(s.sqrt(), f);
            let h = f * g - s;
            a[(i, i)] = f - g;
            for j in l..n {
                let mut s2 = 0.0;
                for k in i..m {
                    s2 += a[(k, i)] * a[(k, j)];
                }
                let f2 = s2 / h;
                for k in i..m {
                    let aki = a[(k, i)];
                    a[(k, j)] += f2 * aki;
                }
            }
            for k in i..m {
                a[(k, i)] *= scale;
            }
        }
        w[i] = scale * g;
        g = 0.0;
        scale = 0.0;
        if i + 1 != n {
            for k in l..n {
                scale += a[(i, k)].abs();
            }
            if scale != 0.0 {
                s = 0.0;
                for k in l..n {
                    a[(i, k)] /= scale;
                    s += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                g = -sign(s.sqrt(), f);
                let h = f * g - s;
                a[(i, l)] = f - g;
                for k in l..n {
                    rv1[k] = a[(i, k)] / h;
                }
                for j in l..m {
                    let mut s2 = 0.0;
                    for k in l..n {
                        s2 += a[(j, k)] * a[(i, k)];
                    }
                    for k in l..n {
                        a[(j, k)] += s2 * rv1[k];
                    }
                }
                for k in l..n {
                    a[(i, k)] *= scale;
                }
            }
        }
        anorm = anorm.max(w[i].abs() + rv1[i].abs());
    }

    // Accumulate right-hand transformations.
    for i in (0..n).rev() {
        if i + 1 < n {
            if g != 0.0 {
                for j in l..n {
                    v[(j, i)] = (a[(i, j)] / a[(i, l)]) / g;
                }
                for j in l..n {
                    let mut s = 0.0;
                    for k in l..n {
                        s += a[(i, k)] * v[(k, j)];
                    }
                    for k in l..n {
                        let vki = v[(k, i)];
                        v[(k, j)] += s * vki;
                    }
                }
            }
            for j in l..n {
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        }
        v[(i, i)] = 1.0;
        g = rv1[i];
        l = i;
    }

    // Accumulate left-hand transformations.
    for i in (0..n).rev() {
        let l = i + 1;
        let gi = w[i];
        for j in l..n {
            a[(i, j)] = 0.0;
        }
        if gi != 0.0 {
            let ginv = 1.0 / gi;
            for j in l..n {
                let mut s = 0.0;
                for k in l..m {
                    s += a[(k, i)] * a[(k, j)];
                }
                let f = (s / a[(i, i)]) * ginv;
                for k in i..m {
                    let aki = a[(k, i)];
                    a[(k, j)] += f * aki;
                }
            }
            for j in i..m {
                a[(j, i)] *= ginv;
            }
        } else {
            for j in i..m {
                a[(j, i)] = 0.0;
            }
        }
        a[(i, i)] += 1.0;
    }

    // Diagonalize the bidiagonal form.
    let eps = f64::EPSILON;
    for k in (0..n).rev() {
        let mut its = 0usize;
        loop {
            let mut flag = true;
            let mut l = k;
            let mut nm = 0usize;
            loop {
                if l == 0 || rv1[l].abs() <= eps * anorm {
                    flag = false;
                    break;
                }
                nm = l - 1;
                if w[nm].abs() <= eps * anorm {
                    break;
                }
                l -= 1;
            }
            if flag {
                // Cancel rv1[l] when w[nm] is negligible.
                let mut c = 0.0;
                let mut s = 1.0;
                for i in l..=k {
                    let f = s * rv1[i];
                    rv1[i] *= c;
                    if f.abs() <= eps * anorm {
                        break;
                    }
                    let g = w[i];
                    let h = pythag(f, g);
                    w[i] = h;
                    let hinv = 1.0 / h;
                    c = g * hinv;
                    s = -f * hinv;
                    for j in 0..m {
                        let y = a[(j, nm)];
                        let z = a[(j, i)];
                        a[(j, nm)] = y * c + z * s;
                        a[(j, i)] = z * c - y * s;
                    }
                }
            }
            let z = w[k];
            if l == k {
                if z < 0.0 {
                    w[k] = -z;
                    for j in 0..n {
                        v[(j, k)] = -v[(j, k)];
                    }
                }
                break;
            }
            if its >= max_iter {
                return Err(Error::NonConvergence {
                    routine: "svd",
                    iterations: its,
                    detail: format!("singular value {k} of {n}, residual superdiagonal {:e}", rv1[k]),
                });
            }
            its += 1;
            let mut x = w[l];
            let nm = k - 1;
            let mut y = w[nm];
            let mut g = rv1[nm];
            let mut h = rv1[k];
            let mut f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
            g = pythag(f, 1.0);
            f = ((x - z) * (x + z) + h * ((y / (f + sign(g, f))) - h)) / x;
            let mut c = 1.0;
            let mut s = 1.0;
            for j in l..=nm {
                let i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g *= c;
                let mut z = pythag(f, h);
                rv1[j] = z;
                c = f / z;
                s = h / z;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                for jj in 0..n {
                    let xv = v[(jj, j)];
                    let zv = v[(jj, i)];
                    v[(jj, j)] = xv * c + zv * s;
                    v[(jj, i)] = zv * c - xv * s;
                }
                z = pythag(f, h);
                w[j] = z;
                if z != 0.0 {
                    let zinv = 1.0 / z;
                    c = f * zinv;
                    s = h * zinv;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                for jj in 0..m {
                    let ya = a[(jj, j)];
                    let za = a[(jj, i)];
                    a[(jj, j)] = ya * c + za * s;
                    a[(jj, i)] = za * c - ya * s;
                }
            }
            rv1[l] = 0.0;
            rv1[k] = f;
            w[k] = x;
        }
    }
    Ok((a, w, v))
}
