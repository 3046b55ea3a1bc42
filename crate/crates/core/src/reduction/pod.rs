use serde::{Deserialize, Serialize};

use super::tracker::{g_orthogonalize, ProjectionTracker};
use super::{fit_decay, DecayReport, ReducedBasis, SnapshotSet};
use crate::error::{Error, Result};
use crate::numerics::{svd, vecops, DenseMatrix};

/// Columns whose new component falls below this fraction of their norm are
/// treated as dependent.
const DEPENDENCE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PodResult {
    pub basis: ReducedBasis,
    /// All `S` singular values of the weighted snapshot matrix, non-increasing.
    pub singular_values: Vec<f64>,
    pub requested: usize,
    /// Fewer than `requested` modes were available.
    pub rank_deficient: bool,
}

/// POD in the reference norm: `U = QR` with `QᵀG_ref Q = I`, then the modes
/// are `Q` times the left singular vectors of `R`.
pub fn pod(snaps: &SnapshotSet, n: usize) -> Result<PodResult> {
    let s = snaps.len();
    if n == 0 || n > s {
        return Err(Error::invalid(format!("POD needs 1 <= N <= S = {s}, got {n}")));
    }
    let g = &snaps.reference;
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut gq: Vec<Vec<f64>> = Vec::new();
    let mut r_cols: Vec<(Vec<f64>, Option<f64>)> = Vec::with_capacity(s);
    for u in &snaps.snapshots {
        let o = g_orthogonalize(u, &q, &gq, g, DEPENDENCE_TOL)?;
        let diag = o.q.as_ref().map(|_| o.norm);
        if let Some(v) = o.q {
            gq.push(g.matvec(&v)?);
            q.push(v);
        }
        r_cols.push((o.coeffs, diag));
    }
    let r = q.len();
    let mut rm = DenseMatrix::zeros(r, s);
    for (j, (coeffs, diag)) in r_cols.iter().enumerate() {
        for (i, &c) in coeffs.iter().enumerate() {
            rm[(i, j)] = c;
        }
        if let Some(d) = diag {
            rm[(coeffs.len(), j)] = *d;
        }
    }
    let f = svd(&rm)?;
    let mut singular_values = f.s.clone();
    singular_values.resize(s, 0.0);
    let smax = f.s.first().copied().unwrap_or(0.0);
    let available = f.s.iter().filter(|&&x| x > DEPENDENCE_TOL * smax && x > 0.0).count();
    let keep = n.min(available);
    let n_dofs = snaps.n_dofs();
    let mut vectors = Vec::with_capacity(keep);
    for k in 0..keep {
        let mut v = vec![0.0; n_dofs];
        for (i, qi) in q.iter().enumerate() {
            vecops::axpy(f.u[(i, k)], qi, &mut v);
        }
        vectors.push(v);
    }
    Ok(PodResult {
        basis: ReducedBasis {
            vectors,
            selected: Vec::new(),
            energies: f.s[..keep].iter().map(|x| x * x).collect(),
        },
        singular_values,
        requested: n,
        rank_deficient: keep < n,
    })
}

/// Worst relative best-approximation error of the training set from the
/// POD-N spaces, `N = 1..=n_max`, with the exponential fit.
pub fn nwidth_estimate(snaps: &SnapshotSet, n_max: usize) -> Result<DecayReport> {
    let n_max = n_max.min(snaps.len());
    let p = pod(snaps, n_max)?;
    let scale = snaps.scale();
    let mut tracker = ProjectionTracker::new(snaps);
    let mut errors = Vec::with_capacity(n_max);
    for v in &p.basis.vectors {
        tracker.push(v.clone())?;
        errors.push(relative_max(&tracker.errors(), scale));
    }
    let last = errors.last().copied().unwrap_or_else(|| relative_max(&tracker.errors(), scale));
    errors.resize(n_max, last);
    let n: Vec<usize> = (1..=n_max).collect();
    // padded entries past the numerical rank are not fitted
    let fitted = p.basis.len().clamp(1, n_max);
    Ok(DecayReport {
        fit: fit_decay(&n[..fitted], &errors[..fitted], snaps.q_b),
        n,
        errors,
        scale,
        q_b: snaps.q_b,
        modes: p.basis.len(),
        rank_deficient: p.rank_deficient,
    })
}

pub(crate) fn relative_max(errors: &[f64], scale: f64) -> f64 {
    let m = errors.iter().copied().fold(0.0, f64::max);
    if scale > 0.0 {
        m / scale
    } else {
        m
    }
}
