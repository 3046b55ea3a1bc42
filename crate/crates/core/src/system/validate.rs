use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    BoundaryOperatorSpec, CoefficientField, FriedrichsSystem, SamplePlan, SamplePoint, Smoothness,
};
use crate::error::{Error, Result};
use crate::numerics::{sym_eig, DenseMatrix};

const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub system: String,
    pub volume_samples: usize,
    pub boundary_samples: usize,
    /// `min λ_min(A⁰+A⁰ᵀ−∇·A)/2` over the samples.
    pub epsilon_estimate: f64,
    pub declared_epsilon: f64,
    pub worst_fs2: SamplePoint,
    /// Largest relative asymmetry of any `A^i` sample.
    pub max_asymmetry: f64,
    pub worst_symmetry: Option<SamplePoint>,
    /// `min λ_min(M + Mᵀ)` over boundary samples.
    pub m1_min_eigenvalue: f64,
    pub worst_m1: Option<SamplePoint>,
    pub fs1_pass: bool,
    pub fs2_pass: bool,
    pub m1_pass: bool,
    pub epsilon_consistent: bool,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.fs1_pass {
            out.push(format!(
                "FS1: A^i asymmetric (relative {:.3e}) at {:?}",
                self.max_asymmetry, self.worst_symmetry
            ));
        }
        if !self.fs2_pass {
            out.push(format!(
                "FS2: epsilon estimate {:.6e} <= 0 at mu = {:?}, x = {:?}",
                self.epsilon_estimate, self.worst_fs2.mu, self.worst_fs2.x
            ));
        }
        if !self.m1_pass {
            out.push(format!(
                "M1: M + M^T has eigenvalue {:.6e} at {:?}",
                self.m1_min_eigenvalue, self.worst_m1
            ));
        }
        if !self.epsilon_consistent {
            out.push(format!(
                "declared epsilon {:.6e} exceeds sampled {:.6e}",
                self.declared_epsilon, self.epsilon_estimate
            ));
        }
        out
    }

    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::Validation(self.failures().join("; ")))
        }
    }
}

fn relative_asymmetry(m: &DenseMatrix) -> f64 {
    let a = m.asymmetry().unwrap_or(f64::INFINITY);
    if a == 0.0 {
        0.0
    } else {
        a / m.max_abs()
    }
}

/// Samples FS1 (symmetry of `A^i`), FS2 (positivity of `A⁰+A⁰ᵀ−∇·A`) and
/// M1 (`M + Mᵀ ⪰ 0` on the boundary).
pub fn validate_friedrichs(sys: &FriedrichsSystem, plan: &SamplePlan) -> Result<ValidationReport> {
    sys.check_shapes()?;
    let vol = plan.volume_points(sys)?;
    let bnd = plan.boundary_points(sys)?;

    let mut eps = f64::INFINITY;
    let mut worst_fs2 = vol[0].clone();
    let mut max_asym = 0.0_f64;
    let mut worst_sym = None;
    for p in &vol {
        let a0 = sys.a0.eval_checked(&p.mu, &p.x, "A0")?;
        for (i, ai) in sys.a.iter().enumerate() {
            let ai = ai.eval_checked(&p.mu, &p.x, &format!("A{}", i + 1))?;
            let asym = relative_asymmetry(&ai);
            if asym > max_asym {
                max_asym = asym;
                worst_sym = Some(p.clone());
            }
        }
        let div = sys.divergence_at(&p.mu, &p.x);
        if !div.is_finite() {
            return Err(Error::NonFinite(format!("div A at mu = {:?}, x = {:?}", p.mu, p.x)));
        }
        let s = a0.add(&a0.transpose())?.sub(&div)?.symmetric_part();
        let lam = sym_eig(&s)?.min() / 2.0;
        if lam < eps {
            eps = lam;
            worst_fs2 = p.clone();
        }
    }

    let mut m1_min = f64::INFINITY;
    let mut worst_m1 = None;
    for p in &bnd {
        let n = p.normal.as_deref().expect("boundary sample has a normal");
        let dface = face_matrix(sys, &p.mu, &p.x, n)?;
        let m = sys.boundary.eval(&p.mu, &p.x, n, &dface);
        if !m.is_finite() {
            return Err(Error::NonFinite(format!(
                "boundary operator at mu = {:?}, x = {:?}",
                p.mu, p.x
            )));
        }
        let sym = m.add(&m.transpose())?;
        let lam = sym_eig(&sym.symmetric_part())?.min();
        let scale = sym.max_abs().max(1.0);
        if lam / scale < m1_min {
            m1_min = lam / scale;
            worst_m1 = Some(p.clone());
        }
    }

    let fs1_pass = max_asym <= SYMMETRY_RTOL;
    let fs2_pass = eps > 0.0;
    let m1_pass = m1_min >= -1e-12;
    let epsilon_consistent = sys.declared_epsilon <= eps * (1.0 + 1e-10) + 1e-14;
    Ok(ValidationReport {
        system: sys.id.clone(),
        volume_samples: vol.len(),
        boundary_samples: bnd.len(),
        epsilon_estimate: eps,
        declared_epsilon: sys.declared_epsilon,
        worst_fs2,
        max_asymmetry: max_asym,
        worst_symmetry: worst_sym,
        m1_min_eigenvalue: m1_min,
        worst_m1,
        fs1_pass,
        fs2_pass,
        m1_pass,
        epsilon_consistent,
        pass: fs1_pass && fs2_pass && m1_pass && epsilon_consistent,
    })
}

/// `D̲ = Σᵢ nᵢ A^i_μ(x)`.
pub fn face_matrix(sys: &FriedrichsSystem, mu: &[f64], x: &[f64], n: &[f64]) -> Result<DenseMatrix> {
    if n.len() != sys.d {
        return Err(Error::DimensionMismatch {
            context: "face normal",
            expected: sys.d,
            found: n.len(),
        });
    }
    let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("normal {n:?} is not a unit vector (norm {norm})")));
    }
    let mut out = DenseMatrix::zeros(sys.m, sys.m);
    for (ni, ai) in n.iter().zip(&sys.a) {
        if *ni != 0.0 {
            out = out.add(&ai.eval(mu, x).scaled(*ni))?;
        }
    }
    Ok(out)
}

/// Formal adjoint `A*v = (A⁰ᵀ − ∇·A)v − Σᵢ A^iᵀ ∂ᵢv` as a Friedrichs' system
/// with boundary operator `Mᵀ`.
pub fn adjoint_coefficients(sys: &FriedrichsSystem) -> FriedrichsSystem {
    let d = sys.d;
    let m = sys.m;
    let primal = sys.clone();
    let a0 = {
        let p = primal.clone();
        let smooth = sys.smoothness();
        CoefficientField::new(d, m, smooth, move |mu, x| {
            p.a0.eval(mu, x)
                .transpose()
                .sub(&p.divergence_at(mu, x))
                .expect("shape")
        })
    };
    let a = sys
        .a
        .iter()
        .map(|ai| {
            let ai = ai.clone();
            CoefficientField::new(d, m, ai.smoothness(), move |mu, x| ai.eval(mu, x).transpose().scaled(-1.0))
        })
        .collect();
    let divergence = {
        let p = primal.clone();
        let smooth = if sys.a.iter().all(|a| a.smoothness() == Smoothness::Constant) {
            Smoothness::Constant
        } else {
            Smoothness::General
        };
        Some(CoefficientField::new(d, m, smooth, move |mu, x| {
            p.divergence_at(mu, x).transpose().scaled(-1.0)
        }))
    };
    let boundary = {
        let rule = sys.boundary.rule.clone();
        BoundaryOperatorSpec {
            rule: Arc::new(move |mu: &[f64], x: &[f64], n: &[f64], dstar: &DenseMatrix| {
                rule(mu, x, n, &dstar.scaled(-1.0)).transpose()
            }),
            param_independent: sys.boundary.param_independent,
            description: format!("adjoint of {}", sys.boundary.description),
        }
    };
    let n1 = sys.n1.as_ref().map(|n1| super::N1Structure {
        a_hat: n1.a_hat.clone(),
        kappa: n1.kappa,
        a_tilde: n1
            .a_tilde
            .iter()
            .map(|t| {
                let t = t.clone();
                CoefficientField::new(d, m, t.smoothness(), move |mu, x| t.eval(mu, x).transpose().scaled(-1.0))
            })
            .collect(),
    });
    FriedrichsSystem {
        id: format!("{}*", sys.id),
        d,
        m,
        state_names: sys.state_names.clone(),
        domain: sys.domain.clone(),
        a0,
        a,
        divergence,
        rhs: sys.rhs.clone(),
        boundary,
        params: sys.params.clone(),
        expansion: None,
        n1,
        declared_epsilon: sys.declared_epsilon,
        denseness_d1_d2: sys.denseness_d1_d2,
        solve_supported: sys.solve_supported,
        coefficient_tag: format!("adjoint:{}", sys.coefficient_tag),
        constants: sys.constants.clone(),
    }
}
