//! Parametrized Friedrichs' systems `A_μ u = A⁰_μ u + Σᵢ A^i_μ ∂ᵢu = f_μ`.
//!
//! A [`FriedrichsSystem`] bundles coefficient fields, a parameter box, a
//! boundary operator and structural metadata. [`registry_get`] builds the
//! example systems shipped with the crate.

mod classify;
mod document;
mod registry;
mod sampling;
mod validate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub use classify::{classify_system, Criterion, SystemClassification, Verdict};
pub use document::{CoefficientTags, SystemDocument, SystemFlags};
pub use registry::{registry_get, registry_ids};
pub use sampling::{SamplePlan, SamplePoint};
pub use validate::{adjoint_coefficients, face_matrix, validate_friedrichs, ValidationReport};

pub type MatrixRule = Arc<dyn Fn(&[f64], &[f64]) -> DenseMatrix + Send + Sync>;
pub type VectorRule = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type ParamScalarRule = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type FieldScalarRule = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// `(μ, x, n, D̲) ↦ M(x, n; μ)`.
pub type BoundaryRule =
    Arc<dyn Fn(&[f64], &[f64], &[f64], &DenseMatrix) -> DenseMatrix + Send + Sync>;

/// Compact box `𝒫 = Π [loᵢ, hiᵢ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub names: Vec<String>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let dom = Self { lower, upper, names };
        dom.check()?;
        Ok(dom)
    }

    pub fn check(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::DimensionMismatch {
                context: "ParameterDomain bounds",
                expected: self.lower.len(),
                found: self.upper.len(),
            });
        }
        if !self.names.is_empty() && self.names.len() != self.lower.len() {
            return Err(Error::DimensionMismatch {
                context: "ParameterDomain names",
                expected: self.lower.len(),
                found: self.names.len(),
            });
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("parameter {i} has an unbounded interval")));
            }
            if lo > hi {
                return Err(Error::invalid(format!("parameter {i}: lower {lo} > upper {hi}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(m, (lo, hi))| {
                    let slack = 1e-12 * (hi - lo).abs().max(1.0);
                    *m >= lo - slack && *m <= hi + slack
                })
    }

    pub fn check_point(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "parameter point",
                expected: self.dim(),
                found: mu.len(),
            });
        }
        if !self.contains(mu) {
            return Err(Error::invalid(format!("parameter {mu:?} lies outside the parameter box")));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Tensor grid with `count` points per axis (endpoints included). The
    /// first coordinate varies fastest.
    pub fn grid(&self, count: usize) -> Vec<Vec<f64>> {
        let p = self.dim();
        let axes: Vec<Vec<f64>> = (0..p)
            .map(|i| linspace(self.lower[i], self.upper[i], count))
            .collect();
        tensor_points(&axes)
    }

    /// `count` points spread over the box: uniform on a line for `p = 1`,
    /// otherwise the smallest tensor grid with at least `count` points,
    /// truncated.
    pub fn uniform_samples(&self, count: usize) -> Vec<Vec<f64>> {
        if self.dim() == 0 || count == 0 {
            return vec![Vec::new(); count.min(1)];
        }
        if self.dim() == 1 {
            return linspace(self.lower[0], self.upper[0], count)
                .into_iter()
                .map(|v| vec![v])
                .collect();
        }
        let mut per_axis: usize = 1;
        while per_axis.pow(self.dim() as u32) < count {
            per_axis += 1;
        }
        let mut pts = self.grid(per_axis);
        pts.truncate(count);
        pts
    }

    pub fn random_samples(&self, count: usize, rng: &mut impl rand::Rng) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                self.lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub(crate) fn tensor_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for &v in axis {
            for p in &out {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    // first axis fastest
    out.sort_by(|a, b| {
        for i in (0..a.len()).rev() {
            match a[i].total_cmp(&b[i]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    Constant,
    Polynomial,
    General,
}

/// Matrix-valued field `(μ, x) ↦ ℝ^{m×m}`.
#[derive(Clone)]
pub struct CoefficientField {
    d: usize,
    m: usize,
    smoothness: Smoothness,
    rule: MatrixRule,
}

impl CoefficientField {
    pub fn new(
        d: usize,
        m: usize,
        smoothness: Smoothness,
        rule: impl Fn(&[f64], &[f64]) -> DenseMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            d,
            m,
            smoothness,
            rule: Arc::new(rule),
        }
    }

    pub fn constant(d: usize, value: DenseMatrix) -> Self {
        let m = value.rows();
        Self::new(d, m, Smoothness::Constant, move |_, _| value.clone())
    }

    pub fn zero(d: usize, m: usize) -> Self {
        Self::constant(d, DenseMatrix::zeros(m, m))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    #[inline]
    pub fn eval(&self, mu: &[f64], x: &[f64]) -> DenseMatrix {
        (self.rule)(mu, x)
    }

    /// Evaluates and checks shape and finiteness.
    pub fn eval_checked(&self, mu: &[f64], x: &[f64], what: &str) -> Result<DenseMatrix> {
        let v = self.eval(mu, x);
        if v.rows() != self.m || v.cols() != self.m {
            return Err(Error::DimensionMismatch {
                context: "coefficient evaluation",
                expected: self.m,
                found: v.rows(),
            });
        }
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{what} at mu = {mu:?}, x = {x:?}")));
        }
        Ok(v)
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct BoundaryOperatorSpec {
    pub rule: BoundaryRule,
    /// Declares that `D − M` and `D + M*` do not depend on μ.
    pub param_independent: bool,
    pub description: String,
}

impl BoundaryOperatorSpec {
    /// `M = |D̲|`, the upwind choice: `ker(D − M)` vanishes on inflow.
    pub fn upwind(param_independent: bool) -> Self {
        Self {
            rule: Arc::new(|_, _, _, dface: &DenseMatrix| {
                crate::numerics::sym_eig(dface)
                    .map(|e| e.abs_matrix())
                    .unwrap_or_else(|_| DenseMatrix::zeros(dface.rows(), dface.cols()).scaled(f64::NAN))
            }),
            param_independent,
            description: "upwind |D|".into(),
        }
    }

    /// `M = D̲` with the `(flux_rows, primal_cols)` block negated. For `D̲` of
    /// the form `[[0, B], [Bᵀ, 0]]` this gives `M = [[0, −B], [Bᵀ, 0]]` and
    /// `ker(D − M)` prescribes the primal unknowns.
    pub fn dirichlet(flux_rows: Vec<usize>, primal_cols: Vec<usize>) -> Self {
        let description = format!(
            "dirichlet on components {primal_cols:?} (flux rows {flux_rows:?})"
        );
        Self {
            rule: Arc::new(move |_, _, _, dface: &DenseMatrix| {
                let mut m = dface.clone();
                for &r in &flux_rows {
                    for &c in &primal_cols {
                        m[(r, c)] = -m[(r, c)];
                    }
                }
                m
            }),
            param_independent: true,
            description,
        }
    }

    pub fn eval(&self, mu: &[f64], x: &[f64], n: &[f64], dface: &DenseMatrix) -> DenseMatrix {
        (self.rule)(mu, x, n, dface)
    }
}

impl fmt::Debug for BoundaryOperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryOperatorSpec")
            .field("param_independent", &self.param_independent)
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

/// `A^i_μ = â_μ Ã^i` with `â_μ ≥ κ > 0`.
#[derive(Clone)]
pub struct N1Structure {
    pub a_hat: FieldScalarRule,
    pub kappa: f64,
    /// `Ã^1..Ã^d`; μ is ignored when evaluating these.
    pub a_tilde: Vec<CoefficientField>,
}

impl fmt::Debug for N1Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("N1Structure")
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

/// One term `θ_q(μ)·(A⁰_q, A^i_q, f_q)` of an affine decomposition.
#[derive(Clone)]
pub struct ExpansionTerm {
    pub label: String,
    pub theta: ParamScalarRule,
    pub zeroth: Option<CoefficientField>,
    pub first_order: Option<Vec<CoefficientField>>,
    pub rhs: Option<VectorRule>,
}

impl ExpansionTerm {
    pub fn is_operator(&self) -> bool {
        self.zeroth.is_some() || self.first_order.is_some()
    }
}

impl fmt::Debug for ExpansionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpansionTerm")
            .field("label", &self.label)
            .field("zeroth", &self.zeroth.is_some())
            .field("first_order", &self.first_order.is_some())
            .field("rhs", &self.rhs.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct SeparableExpansion {
    pub terms: Vec<ExpansionTerm>,
}

impl SeparableExpansion {
    /// Number of operator terms `Q_b`.
    pub fn q_b(&self) -> usize {
        self.terms.iter().filter(|t| t.is_operator()).count().max(1)
    }

    pub fn q_f(&self) -> usize {
        self.terms.iter().filter(|t| t.rhs.is_some()).count()
    }
}

#[derive(Clone)]
pub struct FriedrichsSystem {
    pub id: String,
    pub d: usize,
    pub m: usize,
    pub state_names: Vec<String>,
    /// Spatial box `Ω = Π [aᵢ, bᵢ]`.
    pub domain: Vec<(f64, f64)>,
    pub a0: CoefficientField,
    pub a: Vec<CoefficientField>,
    /// Analytic `∇·A = Σᵢ ∂ᵢA^i`; finite differences are used when absent.
    pub divergence: Option<CoefficientField>,
    pub rhs: VectorRule,
    pub boundary: BoundaryOperatorSpec,
    pub params: ParameterDomain,
    pub expansion: Option<SeparableExpansion>,
    pub n1: Option<N1Structure>,
    /// Rigorous lower bound for `λ_min(A⁰+A⁰ᵀ−∇·A)/2` over the parameter box.
    pub declared_epsilon: f64,
    pub denseness_d1_d2: bool,
    pub solve_supported: bool,
    pub coefficient_tag: String,
    pub constants: serde_json::Value,
}

impl fmt::Debug for FriedrichsSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FriedrichsSystem")
            .field("id", &self.id)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("params", &self.params)
            .field("declared_epsilon", &self.declared_epsilon)
            .finish_non_exhaustive()
    }
}

impl FriedrichsSystem {
    /// Shape consistency of all fields.
    pub fn check_shapes(&self) -> Result<()> {
        if !(1..=2).contains(&self.d) {
            return Err(Error::Unsupported(format!("spatial dimension {}", self.d)));
        }
        if self.a.len() != self.d {
            return Err(Error::DimensionMismatch {
                context: "first-order coefficients",
                expected: self.d,
                found: self.a.len(),
            });
        }
        if self.domain.len() != self.d {
            return Err(Error::DimensionMismatch {
                context: "spatial domain",
                expected: self.d,
                found: self.domain.len(),
            });
        }
        for &(lo, hi) in &self.domain {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("degenerate spatial interval [{lo}, {hi}]")));
            }
        }
        let mut fields: Vec<&CoefficientField> = vec![&self.a0];
        fields.extend(self.a.iter());
        fields.extend(self.divergence.iter());
        for f in fields {
            if f.m() != self.m || f.d() != self.d {
                return Err(Error::DimensionMismatch {
                    context: "coefficient field shape",
                    expected: self.m,
                    found: f.m(),
                });
            }
        }
        if let Some(n1) = &self.n1 {
            if n1.a_tilde.len() != self.d {
                return Err(Error::DimensionMismatch {
                    context: "N1 a_tilde",
                    expected: self.d,
                    found: n1.a_tilde.len(),
                });
            }
        }
        if self.state_names.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "state names",
                expected: self.m,
                found: self.state_names.len(),
            });
        }
        self.params.check()
    }

    pub fn diameter(&self) -> f64 {
        self.domain
            .iter()
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Coarsest smoothness tag over all coefficients.
    pub fn smoothness(&self) -> Smoothness {
        let mut s = self.a0.smoothness();
        for f in &self.a {
            s = s.max(f.smoothness());
        }
        s
    }

    /// `Σᵢ ∂ᵢA^i(μ, x)`.
    pub fn divergence_at(&self, mu: &[f64], x: &[f64]) -> DenseMatrix {
        if let Some(div) = &self.divergence {
            return div.eval(mu, x);
        }
        if self.a.iter().all(|a| a.smoothness() == Smoothness::Constant) {
            return DenseMatrix::zeros(self.m, self.m);
        }
        let h = 1e-6 * self.diameter();
        let mut out = DenseMatrix::zeros(self.m, self.m);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for (i, ai) in self.a.iter().enumerate() {
            xp[i] = x[i] + h;
            xm[i] = x[i] - h;
            let diff = ai.eval(mu, &xp).sub(&ai.eval(mu, &xm)).expect("shape");
            out = out.add(&diff.scaled(0.5 / h)).expect("shape");
            xp[i] = x[i];
            xm[i] = x[i];
        }
        out
    }

    pub fn rhs_at(&self, mu: &[f64], x: &[f64]) -> Vec<f64> {
        (self.rhs)(mu, x)
    }

    pub fn q_b(&self) -> usize {
        self.expansion.as_ref().map_or(1, |e| e.q_b())
    }

    pub fn param_independent_boundary(&self) -> bool {
        self.boundary.param_independent
    }
}

impl PartialOrd for Smoothness {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Smoothness {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let rank = |s: &Smoothness| match s {
            Smoothness::Constant => 0,
            Smoothness::Polynomial => 1,
            Smoothness::General => 2,
        };
        rank(self).cmp(&rank(other))
    }
}
