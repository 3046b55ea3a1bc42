use serde::{Deserialize, Serialize};

use super::pod::relative_max;
use super::tracker::{g_orthogonalize, ProjectionTracker};
use super::{ReducedBasis, SnapshotSet};
use crate::error::{Error, Result};

/// Reorthogonalized components below this fraction of the snapshot norm end
/// the greedy.
const REORTH_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Tolerance,
    MaxSize,
    /// The selected snapshot was numerically inside the current span.
    Exhausted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreedyResult {
    pub basis: ReducedBasis,
    /// `errors[N-1]` is the worst relative error with `N` basis vectors.
    pub errors: Vec<f64>,
    pub scale: f64,
    pub selected_params: Vec<Vec<f64>>,
    pub stop: StopReason,
}

/// Strong greedy: repeatedly add the snapshot with the largest
/// best-approximation error in its own norm.
pub fn strong_greedy(snaps: &SnapshotSet, n_max: usize, tol: f64) -> Result<GreedyResult> {
    if n_max == 0 || n_max > snaps.len() {
        return Err(Error::invalid(format!(
            "strong_greedy needs 1 <= N_max <= S = {}, got {n_max}",
            snaps.len()
        )));
    }
    let g = &snaps.reference;
    let scale = snaps.scale();
    let mut tracker = ProjectionTracker::new(snaps);
    let mut basis = ReducedBasis::default();
    let mut gq: Vec<Vec<f64>> = Vec::new();
    let mut errors = Vec::new();
    let mut current = tracker.errors();
    let stop = loop {
        if relative_max(&current, scale) <= tol {
            break StopReason::Tolerance;
        }
        if basis.len() == n_max {
            break StopReason::MaxSize;
        }
        let mut pick = 0;
        for (j, &e) in current.iter().enumerate() {
            if e > current[pick] {
                pick = j;
            }
        }
        let o = g_orthogonalize(&snaps.snapshots[pick], &basis.vectors, &gq, g, REORTH_TOL)?;
        let Some(q) = o.q else {
            break StopReason::Exhausted;
        };
        gq.push(g.matvec(&q)?);
        tracker.push(q.clone())?;
        basis.vectors.push(q);
        basis.selected.push(pick);
        current = tracker.errors();
        errors.push(relative_max(&current, scale));
    };
    Ok(GreedyResult {
        selected_params: basis.selected.iter().map(|&j| snaps.params[j].clone()).collect(),
        basis,
        errors,
        scale,
        stop,
    })
}
