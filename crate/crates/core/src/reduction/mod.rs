//! Snapshot sweeps, graph-norm POD, strong greedy and N-width estimation.
//!
//! Errors are always reported relative to `e₀ = max_j ‖u_j‖_{X_{μ_j}}`.

mod decay;
mod greedy;
mod pod;
mod tracker;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{
    assemble_operator, assemble_rhs, graph_gram, reference_gram, solve_assembled, DGSpace,
};
use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;
use crate::system::FriedrichsSystem;

pub use decay::{fit_decay, DecayFit, DecayReport, FitStatus, ZERO_FLOOR};
pub use greedy::{strong_greedy, GreedyResult, StopReason};
pub use pod::{nwidth_estimate, pod, PodResult};
pub(crate) use tracker::g_orthogonalize;

/// Residual bound every stored snapshot must satisfy.
pub const SNAPSHOT_RESIDUAL_TOL: f64 = 1e-10;

/// Parameter-independent norm used for orthonormalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// `G₀` built from the N1 structure.
    Graph0,
    L2,
}

/// Norm in which approximation errors are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorNorm {
    /// `‖·‖_{X_μ}` through `G_μ`.
    #[default]
    PerParameter,
    /// The reference norm for every parameter.
    Reference,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// `None` picks `G₀` when the system has N1 structure, else L².
    pub reference: Option<ReferenceKind>,
    pub error_norm: ErrorNorm,
}

/// Basis vectors orthonormal in the reference Gram.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReducedBasis {
    pub vectors: Vec<Vec<f64>>,
    /// Snapshot indices chosen by the greedy; empty for POD.
    pub selected: Vec<usize>,
    /// Squared singular values of the retained POD modes; empty for greedy.
    pub energies: Vec<f64>,
}

impl ReducedBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `max |VᵀGV − I|`.
    pub fn orthonormality_defect(&self, g: &SparseMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.bilinear(a, b) - target).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct SnapshotSet {
    pub params: Vec<Vec<f64>>,
    pub snapshots: Vec<Vec<f64>>,
    pub grams: Vec<Arc<SparseMatrix>>,
    pub reference: Arc<SparseMatrix>,
    pub reference_kind: ReferenceKind,
    pub residuals: Vec<f64>,
    pub q_b: usize,
}

impl SnapshotSet {
    /// Snapshot set from precomputed fields; residuals are recorded as 0.
    pub fn new(
        params: Vec<Vec<f64>>,
        snapshots: Vec<Vec<f64>>,
        grams: Vec<Arc<SparseMatrix>>,
        reference: Arc<SparseMatrix>,
        reference_kind: ReferenceKind,
        q_b: usize,
    ) -> Result<Self> {
        let s = snapshots.len();
        if s == 0 {
            return Err(Error::invalid("a snapshot set needs at least one snapshot"));
        }
        if params.len() != s || grams.len() != s {
            return Err(Error::DimensionMismatch {
                context: "snapshot set parameters/grams",
                expected: s,
                found: if params.len() != s { params.len() } else { grams.len() },
            });
        }
        let n = reference.rows();
        for (j, u) in snapshots.iter().enumerate() {
            if u.len() != n || grams[j].rows() != n {
                return Err(Error::DimensionMismatch {
                    context: "snapshot length",
                    expected: n,
                    found: u.len().min(grams[j].rows()),
                });
            }
            if !crate::numerics::vecops::all_finite(u) {
                return Err(Error::NonFinite(format!("snapshot {j}")));
            }
        }
        Ok(SnapshotSet {
            params,
            residuals: vec![0.0; s],
            snapshots,
            grams,
            reference,
            reference_kind,
            q_b: q_b.max(1),
        })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n_dofs(&self) -> usize {
        self.reference.rows()
    }

    /// `‖u_j‖_{X_{μ_j}}`.
    pub fn norm(&self, j: usize) -> f64 {
        self.grams[j].quadratic(&self.snapshots[j]).max(0.0).sqrt()
    }

    /// `e₀ = max_j ‖u_j‖`.
    pub fn scale(&self) -> f64 {
        (0..self.len()).map(|j| self.norm(j)).fold(0.0, f64::max)
    }

    /// Whether every error norm is the reference norm.
    pub fn parameter_independent_norm(&self) -> bool {
        self.grams.iter().all(|g| Arc::ptr_eq(g, &self.reference))
    }

    /// The same snapshots with all errors measured in the reference norm.
    pub fn with_reference_norm(&self) -> SnapshotSet {
        let mut out = self.clone();
        out.grams = vec![self.reference.clone(); self.len()];
        out
    }
}

/// Reference Gram of the requested kind.
pub fn reference_norm(
    sys: &FriedrichsSystem,
    space: &DGSpace,
    kind: Option<ReferenceKind>,
) -> Result<(ReferenceKind, SparseMatrix)> {
    let kind = kind.unwrap_or(if sys.n1.is_some() {
        ReferenceKind::Graph0
    } else {
        ReferenceKind::L2
    });
    let g = match kind {
        ReferenceKind::Graph0 => reference_gram(sys, space)?,
        ReferenceKind::L2 => space.mass_matrix(),
    };
    Ok((kind, g))
}

/// Solves at every parameter, in parallel, keeping the input order.
pub fn sweep(
    sys: &FriedrichsSystem,
    space: &DGSpace,
    mus: &[Vec<f64>],
    opts: SweepOptions,
) -> Result<SnapshotSet> {
    if !sys.solve_supported {
        return Err(Error::Unsupported(format!("solving '{}' is not supported", sys.id)));
    }
    if mus.is_empty() {
        return Err(Error::invalid("sweep needs at least one parameter"));
    }
    for mu in mus {
        sys.params.check_point(mu)?;
    }
    let (kind, reference) = reference_norm(sys, space, opts.reference)?;
    let reference = Arc::new(reference);
    let solved: Vec<Result<(Vec<f64>, f64, Arc<SparseMatrix>)>> = mus
        .par_iter()
        .map(|mu| {
            let wrap = |e: Error| Error::SolveFailed {
                mu: mu.clone(),
                source: Box::new(e),
            };
            let b = assemble_operator(sys, space, mu)?;
            let f = assemble_rhs(sys, space, mu)?;
            let sol = solve_assembled(&b, &f).map_err(wrap)?;
            if !(sol.residual <= SNAPSHOT_RESIDUAL_TOL) {
                return Err(wrap(Error::NonConvergence {
                    routine: "sparse_solve",
                    iterations: 1,
                    detail: format!("relative residual {:e}", sol.residual),
                }));
            }
            let g = match opts.error_norm {
                ErrorNorm::PerParameter => Arc::new(graph_gram(sys, space, mu)?),
                ErrorNorm::Reference => reference.clone(),
            };
            Ok((sol.u, sol.residual, g))
        })
        .collect();
    let mut snapshots = Vec::with_capacity(mus.len());
    let mut residuals = Vec::with_capacity(mus.len());
    let mut grams = Vec::with_capacity(mus.len());
    for r in solved {
        let (u, res, g) = r?;
        snapshots.push(u);
        residuals.push(res);
        grams.push(g);
    }
    Ok(SnapshotSet {
        params: mus.to_vec(),
        snapshots,
        grams,
        reference,
        reference_kind: kind,
        residuals,
        q_b: sys.q_b(),
    })
}

/// Float formatting shared by every CSV writer: 17 significant digits.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{solve, space_for};
    use crate::system::registry_get;
    use serde_json::{json, Value};

    #[test]
    fn single_snapshot_equals_direct_solve() {
        let sys = registry_get("advection-reaction-1d", &Value::Null).unwrap();
        let space = space_for(&sys, 16, 1).unwrap();
        let s = sweep(&sys, &space, &[vec![3.0]], SweepOptions::default()).unwrap();
        let direct = solve(&sys, &space, &[3.0]).unwrap();
        assert_eq!(s.snapshots[0], direct.u);
        assert_eq!(s.reference_kind, ReferenceKind::Graph0);
    }

    #[test]
    fn duplicate_parameters_give_identical_snapshots() {
        let sys = registry_get("advection-reaction-2d-case1", &Value::Null).unwrap();
        let space = space_for(&sys, 4, 1).unwrap();
        let s = sweep(&sys, &space, &[vec![2.5], vec![7.0], vec![2.5]], SweepOptions::default()).unwrap();
        assert_eq!(s.snapshots[0], s.snapshots[2]);
        assert_ne!(s.snapshots[0], s.snapshots[1]);
    }

    #[test]
    fn residuals_and_norm_choice() {
        let sys = registry_get("advection-reaction-1d", &Value::Null).unwrap();
        let space = space_for(&sys, 32, 1).unwrap();
        let mus = sys.params.uniform_samples(100);
        let s = sweep(&sys, &space, &mus, SweepOptions::default()).unwrap();
        assert!(s.residuals.iter().all(|&r| r <= 1e-10));
        assert!(!s.parameter_independent_norm());
        assert!(s.with_reference_norm().parameter_independent_norm());
        let opts = SweepOptions {
            reference: Some(ReferenceKind::L2),
            error_norm: ErrorNorm::Reference,
        };
        let s = sweep(&sys, &space, &mus[..3], opts).unwrap();
        assert!(s.parameter_independent_norm());
    }

    #[test]
    fn sweep_rejections() {
        let el = registry_get("elasticity-2d", &Value::Null).unwrap();
        let space = space_for(&el, 2, 0).unwrap();
        assert!(matches!(
            sweep(&el, &space, &[vec![2.0, 2.0]], SweepOptions::default()),
            Err(Error::Unsupported(_))
        ));
        let sys = registry_get("advection-reaction-1d", &json!({"c_min": 1.0, "c_max": 2.0})).unwrap();
        let space = space_for(&sys, 4, 0).unwrap();
        assert!(sweep(&sys, &space, &[vec![3.0]], SweepOptions::default()).is_err());
        assert!(sweep(&sys, &space, &[], SweepOptions::default()).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(csv_float(x).parse::<f64>().unwrap(), x);
        }
    }

    fn euclidean_set(snapshots: Vec<Vec<f64>>) -> SnapshotSet {
        let n = snapshots[0].len();
        let g = Arc::new(SparseMatrix::identity(n));
        let s = snapshots.len();
        let params = (0..s).map(|j| vec![j as f64]).collect();
        SnapshotSet::new(params, snapshots, vec![g.clone(); s], g, ReferenceKind::L2, 1).unwrap()
    }

    #[test]
    fn pod_of_identical_snapshots() {
        let u = vec![3.0, 4.0, 0.0];
        let p = pod(&euclidean_set(vec![u.clone(), u]), 2).unwrap();
        assert!((p.singular_values[0] - 2f64.sqrt() * 5.0).abs() < 1e-13);
        assert_eq!(p.singular_values[1], 0.0);
        assert_eq!(p.basis.len(), 1);
        assert!(p.rank_deficient);
    }

    #[test]
    fn pod_of_orthogonal_equal_norm_snapshots() {
        let p = pod(&euclidean_set(vec![vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]]), 2).unwrap();
        assert!((p.singular_values[0] - p.singular_values[1]).abs() < 1e-14);
        assert!((p.singular_values[0] - 2.0).abs() < 1e-14);
        assert!(pod(&euclidean_set(vec![vec![1.0]]), 2).is_err());
    }

    #[test]
    fn pure_reaction_family_has_rank_one() {
        let sys = registry_get("advection-reaction-1d", &json!({"b": 0.0})).unwrap();
        let space = space_for(&sys, 16, 1).unwrap();
        let mus = sys.params.uniform_samples(10);
        let s = sweep(&sys, &space, &mus, SweepOptions::default()).unwrap();
        let p = pod(&s, 5).unwrap();
        assert!(p.singular_values[1] <= 1e-12 * p.singular_values[0]);
        assert_eq!(p.basis.len(), 1);
        let g = strong_greedy(&s, 5, 0.0).unwrap();
        assert!(g.errors[0] <= 1e-12);
        let w = nwidth_estimate(&s, 5).unwrap();
        assert!(w.errors[0] <= 1e-12);
        assert_eq!(w.fit.status, FitStatus::ExactRecovery);
    }

    #[test]
    fn greedy_on_orthonormal_family() {
        let s = 6;
        let e: Vec<Vec<f64>> = (0..s)
            .map(|j| (0..s).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let snaps = euclidean_set(e);
        let g = strong_greedy(&snaps, s, 0.0).unwrap();
        for n in 1..=s {
            let tracker_rms = ((s - n) as f64 / s as f64).sqrt();
            let expect_max = if n < s { 1.0 } else { 0.0 };
            assert!((g.errors[n - 1] - expect_max).abs() < 1e-14);
            let rms = (snaps.snapshots.iter()
                .map(|u| u.iter().enumerate().filter(|(i, _)| !g.basis.selected[..n].contains(i)).map(|(_, x)| x * x).sum::<f64>())
                .sum::<f64>() / s as f64).sqrt();
            assert!((rms - tracker_rms).abs() < 1e-14);
        }
        assert_eq!(g.selected_params[0], vec![0.0]);
    }

    #[test]
    fn greedy_and_pod_on_case_one() {
        let sys = registry_get("advection-reaction-2d-case1", &Value::Null).unwrap();
        let space = space_for(&sys, 8, 1).unwrap();
        let mus = sys.params.uniform_samples(30);
        let s = sweep(&sys, &space, &mus, SweepOptions::default()).unwrap();
        let g = strong_greedy(&s, 12, 0.0).unwrap();
        assert!(g.basis.orthonormality_defect(&s.reference) < 1e-10);
        for w in g.errors.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
        let w = nwidth_estimate(&s, 12).unwrap();
        for p in w.errors.windows(2) {
            assert!(p[1] <= p[0] * (1.0 + 1e-12) + 1e-15);
        }
        let p = pod(&s, 12).unwrap();
        assert!(p.basis.orthonormality_defect(&s.reference) < 1e-10);
        for x in p.singular_values.windows(2) {
            assert!(x[1] <= x[0]);
        }
        assert!(w.to_csv().starts_with("N,e_N\n1,"));
    }

    #[test]
    fn pod_mean_square_optimality() {
        let sys = registry_get("advection-reaction-1d", &Value::Null).unwrap();
        let space = space_for(&sys, 32, 1).unwrap();
        let mus = sys.params.uniform_samples(20);
        let s = sweep(&sys, &space, &mus, SweepOptions::default()).unwrap();
        let g = &s.reference;
        let mse = |basis: &[Vec<f64>]| -> f64 {
            s.snapshots.iter().map(|u| {
                let mut r = u.clone();
                for q in basis {
                    let a = g.bilinear(q, u);
                    crate::numerics::vecops::axpy(-a, q, &mut r);
                }
                g.quadratic(&r)
            }).sum::<f64>()
        };
        let gr = strong_greedy(&s, 6, 0.0).unwrap();
        let p = pod(&s, 6).unwrap();
        for n in 1..=gr.basis.len() {
            assert!(mse(&p.basis.vectors[..n]) <= mse(&gr.basis.vectors[..n]) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn reference_measurement_matches_parameter_independent_norm() {
        let sys = registry_get("advection-reaction-1d", &Value::Null).unwrap();
        let space = space_for(&sys, 16, 1).unwrap();
        let mus = sys.params.uniform_samples(10);
        let opts = SweepOptions { reference: None, error_norm: ErrorNorm::Reference };
        let s = sweep(&sys, &space, &mus, opts).unwrap();
        let g = strong_greedy(&s, 6, 0.0).unwrap();
        let scale = s.scale();
        for (n, e) in g.errors.iter().enumerate() {
            let basis = &g.basis.vectors[..=n];
            let worst = s.snapshots.iter().map(|u| {
                let mut r = u.clone();
                for q in basis {
                    let a = s.reference.bilinear(q, u);
                    crate::numerics::vecops::axpy(-a, q, &mut r);
                }
                s.reference.quadratic(&r).sqrt()
            }).fold(0.0, f64::max) / scale;
            assert!((worst - e).abs() <= 1e-12, "{worst} vs {e}");
        }
    }

    #[test]
    fn greedy_is_reproducible() {
        let sys = registry_get("advection-reaction-2d-case3", &Value::Null).unwrap();
        let space = space_for(&sys, 6, 0).unwrap();
        let mus = sys.params.uniform_samples(12);
        let a = strong_greedy(&sweep(&sys, &space, &mus, SweepOptions::default()).unwrap(), 8, 0.0).unwrap();
        let b = strong_greedy(&sweep(&sys, &space, &mus, SweepOptions::default()).unwrap(), 8, 0.0).unwrap();
        assert_eq!(a.errors, b.errors);
        assert_eq!(a.basis.selected, b.basis.selected);
    }
}
