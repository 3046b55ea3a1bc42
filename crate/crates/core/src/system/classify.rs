use serde::{Deserialize, Serialize};

use super::{validate_friedrichs, FriedrichsSystem, SamplePlan};
use crate::error::Result;
use crate::numerics::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "exponential-certified")]
    ExponentialCertified,
    #[serde(rename = "uncertified")]
    Uncertified,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::ExponentialCertified => "exponential-certified",
            Verdict::Uncertified => "uncertified",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemClassification {
    pub system: String,
    pub verdict: Verdict,
    pub criteria: Vec<Criterion>,
    pub solve_supported: bool,
    pub denseness_d1_d2: bool,
}

impl SystemClassification {
    pub fn failed(&self) -> Vec<&Criterion> {
        self.criteria.iter().filter(|c| !c.passed).collect()
    }
}

/// Largest entry-wise gap between `Σ_q θ_q(μ) A_q` and the full
/// coefficients over a small sample of `(μ, x)`.
pub(crate) fn expansion_mismatch(sys: &FriedrichsSystem, plan: &SamplePlan) -> Result<f64> {
    let Some(exp) = &sys.expansion else {
        return Ok(f64::INFINITY);
    };
    let mut worst = 0.0_f64;
    for p in plan.volume_points(sys)? {
        let mut a0 = DenseMatrix::zeros(sys.m, sys.m);
        let mut ai = vec![DenseMatrix::zeros(sys.m, sys.m); sys.d];
        let mut f = vec![0.0; sys.m];
        for t in &exp.terms {
            let th = (t.theta)(&p.mu);
            if let Some(z) = &t.zeroth {
                a0 = a0.add(&z.eval(&p.mu, &p.x).scaled(th))?;
            }
            if let Some(fo) = &t.first_order {
                for (acc, c) in ai.iter_mut().zip(fo) {
                    *acc = acc.add(&c.eval(&p.mu, &p.x).scaled(th))?;
                }
            }
            if let Some(r) = &t.rhs {
                for (acc, v) in f.iter_mut().zip(r(&p.mu, &p.x)) {
                    *acc += th * v;
                }
            }
        }
        let full0 = sys.a0.eval(&p.mu, &p.x);
        let scale = full0.max_abs().max(1.0);
        worst = worst.max(a0.sub(&full0)?.max_abs() / scale);
        for (acc, c) in ai.iter().zip(&sys.a) {
            let full = c.eval(&p.mu, &p.x);
            worst = worst.max(acc.sub(&full)?.max_abs() / full.max_abs().max(1.0));
        }
        let ff = sys.rhs_at(&p.mu, &p.x);
        for (a, b) in f.iter().zip(&ff) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Checks the hypotheses under which the sectional N-width of the solution
/// set decays exponentially: N1 structure, separability, a parameter
/// independent boundary splitting and FS1/FS2.
pub fn classify_system(sys: &FriedrichsSystem) -> Result<SystemClassification> {
    let plan = SamplePlan {
        per_axis: 3,
        random_points: 64,
        random_params: None,
        seed: 0,
    };
    let report = validate_friedrichs(sys, &plan)?;
    let mut criteria = Vec::new();

    let (n1_ok, n1_detail) = match &sys.n1 {
        Some(n1) if n1.kappa > 0.0 => {
            let mut min_hat = f64::INFINITY;
            for p in plan.volume_points(sys)? {
                min_hat = min_hat.min((n1.a_hat)(&p.mu, &p.x));
            }
            (
                min_hat >= n1.kappa * (1.0 - 1e-12),
                format!("kappa = {}, sampled min a_hat = {min_hat}", n1.kappa),
            )
        }
        Some(n1) => (false, format!("kappa = {} is not positive", n1.kappa)),
        None => (
            false,
            "first-order coefficients are not a scalar multiple of a fixed field".into(),
        ),
    };
    criteria.push(Criterion {
        name: "N1".into(),
        passed: n1_ok,
        detail: n1_detail,
    });

    let (sep_ok, sep_detail) = match &sys.expansion {
        Some(exp) => {
            let gap = expansion_mismatch(sys, &plan)?;
            (
                gap <= 1e-12,
                format!("Q_b = {}, Q_f = {}, sampled mismatch {gap:.3e}", exp.q_b(), exp.q_f()),
            )
        }
        None => (false, "no separable expansion declared".into()),
    };
    criteria.push(Criterion {
        name: "separability".into(),
        passed: sep_ok,
        detail: sep_detail,
    });

    criteria.push(Criterion {
        name: "param-independent boundary".into(),
        passed: sys.boundary.param_independent,
        detail: sys.boundary.description.clone(),
    });

    criteria.push(Criterion {
        name: "FS1/FS2".into(),
        passed: report.fs1_pass && report.fs2_pass,
        detail: format!(
            "max asymmetry {:.3e}, epsilon estimate {:.6e}",
            report.max_asymmetry, report.epsilon_estimate
        ),
    });

    let verdict = if criteria.iter().all(|c| c.passed) {
        Verdict::ExponentialCertified
    } else {
        Verdict::Uncertified
    };
    Ok(SystemClassification {
        system: sys.id.clone(),
        verdict,
        criteria,
        solve_supported: sys.solve_supported,
        denseness_d1_d2: sys.denseness_d1_d2,
    })
}
