//! Numerical checks of the structural properties: L² coercivity, boundary
//! admissibility, norm equivalence, discrete inf-sup stability and a
//! continuity diagnostic for sections.

mod admissibility;
mod norms;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discretization::{solve, AssembledProblem, StructuredMesh};
use crate::error::{Error, Result};
use crate::numerics::{cholesky, svd, DenseMatrix, SparseMatrix};
use crate::system::FriedrichsSystem;

pub use admissibility::{m_admissibility_check, AdmissibilityReport};
pub use norms::{norm_equivalence, NormEquivalenceReport, NormEquivalenceSample};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub mu: Vec<f64>,
    pub trials: usize,
    /// `min uᵀB_μu / uᵀMu` over the random fields.
    pub estimate: f64,
    pub declared_epsilon: f64,
    pub pass: bool,
}

/// Smallest Rayleigh quotient `uᵀB_μu / uᵀMu` over seeded standard normal
/// fields. The upwind form carries the boundary condition weakly, so no
/// projection of the fields is needed. Passes when the estimate is at least
/// `0.9 ε`.
pub fn coercivity_estimate(ap: &AssembledProblem, trials: usize, seed: u64) -> Result<CoercivityReport> {
    if trials == 0 {
        return Err(Error::invalid("coercivity_estimate needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ap.mass.rows();
    let mut est = f64::INFINITY;
    for _ in 0..trials {
        let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        est = est.min(rayleigh_quotient(ap, &u)?);
    }
    Ok(CoercivityReport {
        mu: ap.mu.clone(),
        trials,
        estimate: est,
        declared_epsilon: ap.declared_epsilon,
        pass: est >= 0.9 * ap.declared_epsilon,
    })
}

pub fn rayleigh_quotient(ap: &AssembledProblem, u: &[f64]) -> Result<f64> {
    let den = ap.mass.quadratic(u);
    if !(den > 0.0) {
        return Err(Error::invalid("Rayleigh quotient of a zero field"));
    }
    Ok(ap.system.quadratic(u) / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Trial in the graph space, test in L².
    Weak,
    /// Trial in L², test in the adjoint graph space.
    Ultraweak,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfSupReport {
    pub mu: Vec<f64>,
    pub form: Formulation,
    pub dofs: usize,
    pub beta_h: f64,
    /// `(1 + ‖A⁻¹‖²)^{-1/2}` (weak) or `(1 + ‖A^{-*}‖²)^{-1/2}` (ultraweak)
    /// with the inverse norm taken from the discrete operator in L².
    pub theoretical_surrogate: f64,
    pub pass: bool,
}

fn dense_cholesky(m: &SparseMatrix) -> Result<DenseMatrix> {
    cholesky(&m.to_dense())
}

/// `σ_min(L_Y⁻¹ B L_X⁻ᵀ)` for Gram factors `G = L Lᵀ` (rows of `B` = test).
fn normalized_smin(b: &DenseMatrix, lx: &DenseMatrix, ly: &DenseMatrix) -> Result<f64> {
    let t = DenseMatrix::lower_solve_matrix(lx, &b.transpose());
    let c = DenseMatrix::lower_solve_matrix(ly, &t.transpose());
    let f = svd(&c)?;
    Ok(f.s.last().copied().unwrap_or(0.0))
}

/// Discrete inf-sup constant with dense factorizations; intended for small
/// meshes.
pub fn discrete_infsup(ap: &AssembledProblem, form: Formulation) -> Result<InfSupReport> {
    let b = ap.system.to_dense();
    let lm = dense_cholesky(&ap.mass)?;
    let (lx, ly, surrogate_op) = match form {
        Formulation::Weak => (dense_cholesky(&ap.gram)?, lm.clone(), b.clone()),
        Formulation::Ultraweak => (lm.clone(), dense_cholesky(&ap.adjoint_gram)?, b.transpose()),
    };
    let beta = normalized_smin(&b, &lx, &ly)?;
    let s = normalized_smin(&surrogate_op, &lm, &lm)?;
    let theoretical = if s > 0.0 { (1.0 + 1.0 / (s * s)).powf(-0.5) } else { 0.0 };
    Ok(InfSupReport {
        mu: ap.mu.clone(),
        form,
        dofs: b.rows(),
        beta_h: beta,
        theoretical_surrogate: theoretical,
        pass: beta > 1e-10,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FellDiagnostic {
    pub path: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    /// `max_j |‖σ(μ_{j+1})‖ − ‖σ(μ_j)‖| / |μ_{j+1} − μ_j|`.
    pub max_jump_rate: f64,
}

/// Norm of a section along an ordered parameter path, each value measured in
/// its own parameter's norm.
pub fn fell_continuity_diagnostic(
    section: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    gram: &dyn Fn(&[f64]) -> Result<SparseMatrix>,
    path: &[Vec<f64>],
) -> Result<FellDiagnostic> {
    if path.len() < 3 {
        return Err(Error::invalid("the continuity diagnostic needs at least 3 path samples"));
    }
    let mut norms = Vec::with_capacity(path.len());
    for mu in path {
        let v = section(mu)?;
        norms.push(gram(mu)?.quadratic(&v).max(0.0).sqrt());
    }
    let mut rate = 0.0_f64;
    for j in 0..path.len() - 1 {
        let step = path[j + 1]
            .iter()
            .zip(&path[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if step > 0.0 {
            rate = rate.max((norms[j + 1] - norms[j]).abs() / step);
        }
    }
    Ok(FellDiagnostic {
        path: path.to_vec(),
        norms,
        max_jump_rate: rate,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub cells: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log₂(e_{j}/e_{j+1})` for successive halvings.
    pub eoc: Vec<f64>,
}

/// L² errors against `exact` on uniform refinements.
pub fn convergence_study(
    sys: &FriedrichsSystem,
    mu: &[f64],
    k: usize,
    cells: &[usize],
    exact: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<ConvergenceStudy> {
    let mut errors = Vec::with_capacity(cells.len());
    for &n in cells {
        let mesh = StructuredMesh::uniform(n, &sys.domain)?;
        let space = crate::discretization::build_space(mesh, k, sys.m)?;
        let sol = solve(sys, &space, mu)?;
        errors.push(space.l2_error(&sol.u, exact, k + 4));
    }
    let eoc = errors
        .windows(2)
        .zip(cells.windows(2))
        .map(|(e, c)| (e[0] / e[1]).ln() / (c[1] as f64 / c[0] as f64).ln())
        .collect();
    Ok(ConvergenceStudy {
        cells: cells.to_vec(),
        errors,
        eoc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, space_for};
    use crate::system::{registry_get, BoundaryOperatorSpec};
    use serde_json::{json, Value};
    use std::sync::Arc;

    #[test]
    fn coercivity_of_advection_reaction() {
        let sys = registry_get("advection-reaction-1d", &json!({"c": 1.0})).unwrap();
        let space = space_for(&sys, 16, 1).unwrap();
        let ap = assemble(&sys, &space, &[1.0]).unwrap();
        let r = coercivity_estimate(&ap, 50, 3).unwrap();
        assert!(r.estimate >= 1.0 - 1e-12 && r.pass);
    }

    #[test]
    fn coercivity_scales_with_reaction() {
        let sys = registry_get("advection-reaction-2d-case1", &json!({"b": [0.0, 0.0], "c": 10.0})).unwrap();
        let space = space_for(&sys, 4, 1).unwrap();
        let ap = assemble(&sys, &space, &[10.0]).unwrap();
        let r = coercivity_estimate(&ap, 20, 1).unwrap();
        assert!((r.estimate - 10.0).abs() < 1e-12);
        assert!(coercivity_estimate(&ap, 0, 1).is_err());
        assert!(rayleigh_quotient(&ap, &vec![0.0; space.n_dofs()]).is_err());
    }

    #[test]
    fn pure_reaction_weak_infsup() {
        let sys = registry_get("advection-reaction-1d", &json!({"b": 0.0, "c": 1.0})).unwrap();
        let space = space_for(&sys, 6, 1).unwrap();
        let ap = assemble(&sys, &space, &[1.0]).unwrap();
        let r = discrete_infsup(&ap, Formulation::Weak).unwrap();
        assert!((r.beta_h - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scalar_admissibility() {
        let sys = registry_get("advection-reaction-2d-case1", &Value::Null).unwrap();
        let space = space_for(&sys, 4, 1).unwrap();
        let r = m_admissibility_check(&sys, &space, &[2.0]).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.trace_dofs, 16 * 2);

        let mut neg = sys.clone();
        let up = BoundaryOperatorSpec::upwind(true);
        neg.boundary.rule = Arc::new(move |mu, x, n, d| up.eval(mu, x, n, d).scaled(-1.0));
        let r = m_admissibility_check(&neg, &space, &[2.0]).unwrap();
        assert!(!r.m1_pass);
    }

    #[test]
    fn dirichlet_admissibility_for_systems() {
        for id in ["cdr-1d", "cdr-2d", "elasticity-2d"] {
            let sys = registry_get(id, &Value::Null).unwrap();
            let space = space_for(&sys, 3, 1).unwrap();
            let r = m_admissibility_check(&sys, &space, &sys.params.center()).unwrap();
            assert!(r.pass, "{id}: {r:?}");
        }
    }

    #[test]
    fn norm_equivalence_constants() {
        // â = 1, A⁰ = 1: C = max{2, 3} = 3
        let sys = registry_get("advection-reaction-1d", &json!({"c": 1.0})).unwrap();
        let space = space_for(&sys, 8, 1).unwrap();
        let r = norm_equivalence(&sys, &space, &[vec![1.0]], 20, 0).unwrap();
        assert_eq!(r.theoretical_upper, 3.0);
        assert!(r.pass);
        // μ-independent: ratio ≡ 1
        let sys = registry_get("advection-reaction-1d", &json!({"c": 1.0, "b": 1.0})).unwrap();
        let mut s2 = sys.clone();
        s2.a0 = crate::system::CoefficientField::zero(1, 1);
        s2.declared_epsilon = 1.0;
        let r = norm_equivalence(&s2, &space, &[vec![1.0]], 5, 0).unwrap();
        assert!((r.empirical_lower - 1.0).abs() < 1e-12 && (r.empirical_upper - 1.0).abs() < 1e-12);

        let rot = registry_get("advection-reaction-2d-case3", &Value::Null).unwrap();
        let space = space_for(&rot, 2, 0).unwrap();
        assert!(matches!(
            norm_equivalence(&rot, &space, &[vec![0.0]], 1, 0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn fell_constant_section_independent_norm() {
        let sys = registry_get("advection-reaction-1d", &Value::Null).unwrap();
        let space = space_for(&sys, 8, 0).unwrap();
        let v = space.project(&|x| vec![x[0]], 2);
        let m = space.mass_matrix();
        let path: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0 + i as f64]).collect();
        let r = fell_continuity_diagnostic(&|_| Ok(v.clone()), &|_| Ok(m.clone()), &path).unwrap();
        assert_eq!(r.max_jump_rate, 0.0);
        assert!(fell_continuity_diagnostic(&|_| Ok(v.clone()), &|_| Ok(m.clone()), &path[..2]).is_err());
    }

    #[test]
    fn manufactured_solution_rates() {
        let sys = registry_get("advection-reaction-1d", &json!({"c": 1.0})).unwrap();
        let exact = |x: &[f64]| vec![1.0 - (-x[0]).exp()];
        let cells = [32, 64, 128, 256];
        let k0 = convergence_study(&sys, &[1.0], 0, &cells, &exact).unwrap();
        assert!(k0.eoc.iter().all(|&e| e >= 0.8), "{:?}", k0.eoc);
        let k1 = convergence_study(&sys, &[1.0], 1, &cells, &exact).unwrap();
        assert!(k1.eoc.iter().all(|&e| e >= 1.4), "{:?}", k1.eoc);
    }
}
