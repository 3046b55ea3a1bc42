use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discretization::{graph_gram, quadrature::tensor_rule, reference_gram, DGSpace};
use crate::error::{Error, Result};
use crate::numerics::{sym_eig, DenseMatrix};
use crate::system::FriedrichsSystem;

const RELATIVE_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEquivalenceSample {
    pub mu: Vec<f64>,
    /// `sup ‖A⁰_μ‖₂` over sampled points.
    pub a0_sup: f64,
    pub a_hat_sup: f64,
    pub lower_constant: f64,
    pub upper_constant: f64,
    /// Extremes of `uᵀG_μu / uᵀG₀u` over the random fields.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub violations: usize,
}

/// Empirical check of `c ‖u‖₀² ≤ ‖u‖_μ² ≤ C ‖u‖₀²` with
/// `C = max{2‖â‖², 1 + 2‖A⁰‖²}` and `c = 1 / max{2κ⁻², 1 + 2κ⁻²‖A⁰‖²}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEquivalenceReport {
    pub system: String,
    pub kappa: f64,
    pub trials: usize,
    pub samples: Vec<NormEquivalenceSample>,
    /// Smallest / largest empirical ratio over all μ.
    pub empirical_lower: f64,
    pub empirical_upper: f64,
    /// Weakest theoretical constants over all μ.
    pub theoretical_lower: f64,
    pub theoretical_upper: f64,
    pub violations: usize,
    pub worst_witness: Option<Vec<f64>>,
    pub pass: bool,
}

pub(crate) fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    let ata = a.transpose().matmul(a)?;
    Ok(sym_eig(&ata.symmetric_part())?.max().max(0.0).sqrt())
}

/// Points where coefficient sup-norms are sampled: all volume quadrature
/// points of the space plus the cell vertices.
fn sup_points(space: &DGSpace) -> Vec<Vec<f64>> {
    let d = space.d();
    let (pts, _) = tensor_rule(d, space.order() + 2);
    let mut out = Vec::new();
    let corners: Vec<Vec<f64>> = (0..(1usize << d))
        .map(|c| (0..d).map(|a| if (c >> a) & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect();
    for c in 0..space.mesh().n_cells() {
        for xi in pts.iter().chain(&corners) {
            out.push(space.mesh().map_to_physical(c, xi));
        }
    }
    out
}

pub fn norm_equivalence(
    sys: &FriedrichsSystem,
    space: &DGSpace,
    mus: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<NormEquivalenceReport> {
    let n1 = sys.n1.as_ref().ok_or_else(|| {
        Error::Unsupported(format!(
            "system '{}' lacks the N1 structure A^i = a_hat * A~^i, so no parameter-independent equivalent norm is available",
            sys.id
        ))
    })?;
    if !(n1.kappa > 0.0) {
        return Err(Error::invalid(format!("kappa = {} must be positive", n1.kappa)));
    }
    if trials == 0 || mus.is_empty() {
        return Err(Error::invalid("norm_equivalence needs trials >= 1 and at least one parameter"));
    }
    let g0 = reference_gram(sys, space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = space.n_dofs();
    let fields: Vec<Vec<f64>> = (0..trials)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let g0_norms: Vec<f64> = fields.iter().map(|u| g0.quadratic(u)).collect();
    let pts = sup_points(space);
    let kinv2 = 1.0 / (n1.kappa * n1.kappa);

    let mut samples = Vec::with_capacity(mus.len());
    let mut worst_witness = None;
    let mut worst_excess = 0.0_f64;
    for mu in mus {
        let mut a0_sup = 0.0_f64;
        let mut hat_sup = 0.0_f64;
        for x in &pts {
            a0_sup = a0_sup.max(spectral_norm(&sys.a0.eval(mu, x))?);
            hat_sup = hat_sup.max((n1.a_hat)(mu, x).abs());
        }
        let upper = (2.0 * hat_sup * hat_sup).max(1.0 + 2.0 * a0_sup * a0_sup);
        let lower = 1.0 / (2.0 * kinv2).max(1.0 + 2.0 * kinv2 * a0_sup * a0_sup);
        let g = graph_gram(sys, space, mu)?;
        let mut rmin = f64::INFINITY;
        let mut rmax = 0.0_f64;
        let mut violations = 0;
        for (u, &n0) in fields.iter().zip(&g0_norms) {
            let r = g.quadratic(u) / n0;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
            let excess = (lower * (1.0 - RELATIVE_SLACK) - r).max(r - upper * (1.0 + RELATIVE_SLACK));
            if excess > 0.0 {
                violations += 1;
                if excess > worst_excess {
                    worst_excess = excess;
                    worst_witness = Some(mu.clone());
                }
            }
        }
        samples.push(NormEquivalenceSample {
            mu: mu.clone(),
            a0_sup,
            a_hat_sup: hat_sup,
            lower_constant: lower,
            upper_constant: upper,
            ratio_min: rmin,
            ratio_max: rmax,
            violations,
        });
    }
    let violations = samples.iter().map(|s| s.violations).sum();
    Ok(NormEquivalenceReport {
        system: sys.id.clone(),
        kappa: n1.kappa,
        trials,
        empirical_lower: samples.iter().map(|s| s.ratio_min).fold(f64::INFINITY, f64::min),
        empirical_upper: samples.iter().map(|s| s.ratio_max).fold(0.0, f64::max),
        theoretical_lower: samples.iter().map(|s| s.lower_constant).fold(f64::INFINITY, f64::min),
        theoretical_upper: samples.iter().map(|s| s.upper_constant).fold(0.0, f64::max),
        samples,
        violations,
        worst_witness,
        pass: violations == 0,
    })
}
