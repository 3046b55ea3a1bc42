use std::f64::consts::PI;
use std::sync::Arc;

use serde_json::{Map, Value};

use super::{
    BoundaryOperatorSpec, CoefficientField, ExpansionTerm, FriedrichsSystem, N1Structure,
    ParameterDomain, SeparableExpansion,
};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const IDS: [&str; 7] = [
    "advection-reaction-1d",
    "advection-reaction-2d-case1",
    "advection-reaction-2d-case2",
    "advection-reaction-2d-case3",
    "cdr-1d",
    "cdr-2d",
    "elasticity-2d",
];

pub fn registry_ids() -> Vec<String> {
    IDS.iter().map(|s| s.to_string()).collect()
}

/// Builds a registry system. `raw` is a JSON object of constants (or null);
/// unknown keys are rejected.
pub fn registry_get(name: &str, raw: &Value) -> Result<FriedrichsSystem> {
    build(name, raw, None)
}

/// As [`registry_get`] with the parameter box replaced by `bounds`.
pub(crate) fn build(
    name: &str,
    raw: &Value,
    bounds: Option<&ParameterDomain>,
) -> Result<FriedrichsSystem> {
    let mut raw = Raw::new(raw)?;
    let sys = match name {
        "advection-reaction-1d" => scalar_reaction(&mut raw, 1, bounds)?,
        "advection-reaction-2d-case1" => scalar_reaction(&mut raw, 2, bounds)?,
        "advection-reaction-2d-case2" => rotating(&mut raw, false, bounds)?,
        "advection-reaction-2d-case3" => rotating(&mut raw, true, bounds)?,
        "cdr-1d" => cdr(&mut raw, 1, bounds)?,
        "cdr-2d" => cdr(&mut raw, 2, bounds)?,
        "elasticity-2d" => elasticity(&mut raw, bounds)?,
        _ => {
            return Err(Error::UnknownSystem {
                name: name.to_string(),
                available: registry_ids(),
            })
        }
    };
    raw.finish(name)?;
    sys.check_shapes()?;
    Ok(sys)
}

struct Raw {
    map: Map<String, Value>,
    used: Map<String, Value>,
}

impl Raw {
    fn new(v: &Value) -> Result<Self> {
        let map = match v {
            Value::Null => Map::new(),
            Value::Object(m) => m.clone(),
            other => return Err(Error::invalid(format!("system constants must be an object, got {other}"))),
        };
        Ok(Self {
            map,
            used: Map::new(),
        })
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = match self.map.remove(key) {
            None => default,
            Some(Value::Number(n)) => n
                .as_f64()
                .ok_or_else(|| Error::invalid(format!("constant '{key}' is not a real number")))?,
            Some(other) => return Err(Error::invalid(format!("constant '{key}' must be a number, got {other}"))),
        };
        if !v.is_finite() {
            return Err(Error::invalid(format!("constant '{key}' is not finite")));
        }
        self.used.insert(key.into(), v.into());
        Ok(v)
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        if self.map.contains_key(key) {
            self.f64(key, 0.0).map(Some)
        } else {
            Ok(None)
        }
    }

    fn vec(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self.map.remove(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|x| {
                    x.as_f64()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::invalid(format!("constant '{key}' has a non-numeric entry")))
                })
                .collect::<Result<_>>()?,
            Some(other) => return Err(Error::invalid(format!("constant '{key}' must be an array, got {other}"))),
        };
        if v.len() != default.len() {
            return Err(Error::DimensionMismatch {
                context: "vector constant",
                expected: default.len(),
                found: v.len(),
            });
        }
        self.used.insert(key.into(), Value::from(v.clone()));
        Ok(v)
    }

    /// Interval from `{prefix}_min`/`{prefix}_max`, or a single `prefix`
    /// value pinning both ends.
    fn interval(&mut self, prefix: &str, lo: f64, hi: f64) -> Result<(f64, f64)> {
        if let Some(v) = self.opt_f64(prefix)? {
            for k in ["min", "max"] {
                if self.map.contains_key(&format!("{prefix}_{k}")) {
                    return Err(Error::invalid(format!("'{prefix}' conflicts with '{prefix}_{k}'")));
                }
            }
            return Ok((v, v));
        }
        let a = self.f64(&format!("{prefix}_min"), lo)?;
        let b = self.f64(&format!("{prefix}_max"), hi)?;
        Ok((a, b))
    }

    fn finish(self, name: &str) -> Result<()> {
        if let Some(k) = self.map.keys().next() {
            return Err(Error::invalid(format!("unknown constant '{k}' for system '{name}'")));
        }
        Ok(())
    }

    fn used(&self) -> Value {
        Value::Object(self.used.clone())
    }
}

fn apply_bounds(
    default: ParameterDomain,
    bounds: Option<&ParameterDomain>,
) -> Result<ParameterDomain> {
    match bounds {
        None => Ok(default),
        Some(b) => {
            if b.dim() != default.dim() {
                return Err(Error::DimensionMismatch {
                    context: "parameter box",
                    expected: default.dim(),
                    found: b.dim(),
                });
            }
            let names = if b.names.is_empty() { default.names } else { b.names.clone() };
            ParameterDomain::new(b.lower.clone(), b.upper.clone(), names)
        }
    }
}

fn unit_box(d: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); d]
}

fn scalar(v: f64) -> DenseMatrix {
    DenseMatrix::from_diag(&[v])
}

fn n1_from_constant(fields: &[CoefficientField]) -> N1Structure {
    N1Structure {
        a_hat: Arc::new(|_, _| 1.0),
        kappa: 1.0,
        a_tilde: fields.to_vec(),
    }
}

/// `∇·(b u) + c_μ u = f` with constant `b` and `μ = c`.
fn scalar_reaction(
    raw: &mut Raw,
    d: usize,
    bounds: Option<&ParameterDomain>,
) -> Result<FriedrichsSystem> {
    let b = if d == 1 {
        vec![raw.f64("b", 1.0)?]
    } else {
        raw.vec("b", &[1.0, 0.5])?
    };
    let (c_lo, c_hi) = raw.interval("c", 1.0, 10.0)?;
    let f = raw.f64("f", 1.0)?;
    let params = apply_bounds(
        ParameterDomain::new(vec![c_lo], vec![c_hi], vec!["c".into()])?,
        bounds,
    )?;
    let a: Vec<CoefficientField> = b.iter().map(|&bi| CoefficientField::constant(d, scalar(bi))).collect();
    let a0 = CoefficientField::new(d, 1, super::Smoothness::Constant, |mu, _| scalar(mu[0]));
    let expansion = SeparableExpansion {
        terms: vec![
            ExpansionTerm {
                label: "transport".into(),
                theta: Arc::new(|_| 1.0),
                zeroth: None,
                first_order: Some(a.clone()),
                rhs: Some(Arc::new(move |_, _| vec![f])),
            },
            ExpansionTerm {
                label: "reaction".into(),
                theta: Arc::new(|mu| mu[0]),
                zeroth: Some(CoefficientField::constant(d, scalar(1.0))),
                first_order: None,
                rhs: None,
            },
        ],
    };
    let id = if d == 1 {
        "advection-reaction-1d"
    } else {
        "advection-reaction-2d-case1"
    };
    Ok(FriedrichsSystem {
        id: id.into(),
        d,
        m: 1,
        state_names: vec!["u".into()],
        domain: unit_box(d),
        n1: Some(n1_from_constant(&a)),
        a0,
        a,
        divergence: None,
        rhs: Arc::new(move |_, _| vec![f]),
        boundary: BoundaryOperatorSpec::upwind(true),
        declared_epsilon: params.lower[0],
        params,
        expansion: Some(expansion),
        denseness_d1_d2: true,
        solve_supported: true,
        coefficient_tag: "advection-reaction".into(),
        constants: raw.used(),
    })
}

/// `∇·(b_μ u) + c u = f` with `b_μ = (cos μ, sin μ)`.
fn rotating(
    raw: &mut Raw,
    full_circle: bool,
    bounds: Option<&ParameterDomain>,
) -> Result<FriedrichsSystem> {
    let c = raw.f64("c", 1.0)?;
    let f = raw.f64("f", 1.0)?;
    let (lo, hi, id, dense) = if full_circle {
        (0.0, 2.0 * PI, "advection-reaction-2d-case3", false)
    } else {
        let margin = raw.f64("angle_margin", 0.1)?;
        (margin, 0.5 * PI - margin, "advection-reaction-2d-case2", true)
    };
    let params = apply_bounds(
        ParameterDomain::new(vec![lo], vec![hi], vec!["angle".into()])?,
        bounds,
    )?;
    let a = vec![
        CoefficientField::new(2, 1, super::Smoothness::Constant, |mu, _| scalar(mu[0].cos())),
        CoefficientField::new(2, 1, super::Smoothness::Constant, |mu, _| scalar(mu[0].sin())),
    ];
    Ok(FriedrichsSystem {
        id: id.into(),
        d: 2,
        m: 1,
        state_names: vec!["u".into()],
        domain: unit_box(2),
        a0: CoefficientField::constant(2, scalar(c)),
        a,
        divergence: None,
        rhs: Arc::new(move |_, _| vec![f]),
        boundary: BoundaryOperatorSpec::upwind(false),
        params,
        expansion: None,
        n1: None,
        declared_epsilon: c,
        denseness_d1_d2: dense,
        solve_supported: true,
        coefficient_tag: "advection-reaction-rotating".into(),
        constants: raw.used(),
    })
}

/// Total-flux form of `−∇·(δ∇u) + b·∇u + c u = f` with unknowns `(σ, u)`,
/// `μ = (δ, c)` and constant `b`.
fn cdr(raw: &mut Raw, d: usize, bounds: Option<&ParameterDomain>) -> Result<FriedrichsSystem> {
    let (d_lo, d_hi) = raw.interval("diffusivity", 0.5, 2.0)?;
    let (c_lo, c_hi) = raw.interval("c", 1.0, 5.0)?;
    let b = if d == 1 {
        vec![raw.f64("b", 0.5)?]
    } else {
        raw.vec("b", &[0.5, 0.25])?
    };
    let f = raw.f64("f", 1.0)?;
    let params = apply_bounds(
        ParameterDomain::new(
            vec![d_lo, c_lo],
            vec![d_hi, c_hi],
            vec!["diffusivity".into(), "c".into()],
        )?,
        bounds,
    )?;
    if params.lower[0] <= 0.0 {
        return Err(Error::invalid("diffusivity must be positive"));
    }
    let m = d + 1;
    let u = d;

    let first: Vec<CoefficientField> = (0..d)
        .map(|i| {
            let mut ai = DenseMatrix::zeros(m, m);
            ai[(i, u)] = 1.0;
            ai[(u, i)] = 1.0;
            CoefficientField::constant(d, ai)
        })
        .collect();
    let mut inv_part = DenseMatrix::zeros(m, m);
    for i in 0..d {
        inv_part[(i, i)] = 1.0;
        inv_part[(i, u)] = -b[i];
    }
    let mut reaction_part = DenseMatrix::zeros(m, m);
    reaction_part[(u, u)] = 1.0;
    let a0 = {
        let inv_part = inv_part.clone();
        let reaction_part = reaction_part.clone();
        CoefficientField::new(d, m, super::Smoothness::Constant, move |mu, _| {
            inv_part
                .scaled(1.0 / mu[0])
                .add(&reaction_part.scaled(mu[1]))
                .expect("shape")
        })
    };
    let rhs_vec = {
        let mut v = vec![0.0; m];
        v[u] = f;
        v
    };
    let expansion = SeparableExpansion {
        terms: vec![
            ExpansionTerm {
                label: "transport".into(),
                theta: Arc::new(|_| 1.0),
                zeroth: None,
                first_order: Some(first.clone()),
                rhs: Some({
                    let r = rhs_vec.clone();
                    Arc::new(move |_, _| r.clone())
                }),
            },
            ExpansionTerm {
                label: "inverse diffusivity".into(),
                theta: Arc::new(|mu| 1.0 / mu[0]),
                zeroth: Some(CoefficientField::constant(d, inv_part)),
                first_order: None,
                rhs: None,
            },
            ExpansionTerm {
                label: "reaction".into(),
                theta: Arc::new(|mu| mu[1]),
                zeroth: Some(CoefficientField::constant(d, reaction_part)),
                first_order: None,
                rhs: None,
            },
        ],
    };
    // Young: 2/δ|σ|² − 2(b·σ)u/δ + 2c u² ≥ |σ|²/δ + (2c − |b|²/δ) u²
    let b2: f64 = b.iter().map(|v| v * v).sum();
    let eps = 0.5
        * (1.0 / params.upper[0]).min(2.0 * params.lower[1] - b2 / params.lower[0]);
    let mut names: Vec<String> = (1..=d).map(|i| format!("sigma{i}")).collect();
    names.push("u".into());
    let id = if d == 1 { "cdr-1d" } else { "cdr-2d" };
    Ok(FriedrichsSystem {
        id: id.into(),
        d,
        m,
        state_names: names,
        domain: unit_box(d),
        n1: Some(n1_from_constant(&first)),
        a0,
        a: first,
        divergence: None,
        rhs: Arc::new(move |_, _| rhs_vec.clone()),
        boundary: BoundaryOperatorSpec::dirichlet((0..d).collect(), vec![u]),
        params,
        expansion: Some(expansion),
        declared_epsilon: eps,
        denseness_d1_d2: true,
        solve_supported: true,
        coefficient_tag: "convection-diffusion-reaction".into(),
        constants: raw.used(),
    })
}

// Unknowns (σ11, σ12, σ22, ρ, ũ1, ũ2); the σ12 row is doubled so that the
// first-order matrices are symmetric.
const S11: usize = 0;
const S12: usize = 1;
const S22: usize = 2;
const RHO: usize = 3;
const U1: usize = 4;
const U2: usize = 5;

fn elasticity(raw: &mut Raw, bounds: Option<&ParameterDomain>) -> Result<FriedrichsSystem> {
    let (l_lo, l_hi) = raw.interval("lambda", 1.0, 10.0)?;
    let (m_lo, m_hi) = raw.interval("shear", 1.0, 5.0)?;
    let gamma = raw.f64("gamma", 1.0)?;
    let force = raw.vec("f", &[0.0, -1.0])?;
    let params = apply_bounds(
        ParameterDomain::new(
            vec![l_lo, m_lo],
            vec![l_hi, m_hi],
            vec!["lambda".into(), "shear".into()],
        )?,
        bounds,
    )?;
    if params.lower[0] <= 0.0 || params.lower[1] <= 0.0 {
        return Err(Error::invalid("Lame constants must be positive"));
    }
    let m = 6;
    let mut a1 = DenseMatrix::zeros(m, m);
    for (r, c) in [(S11, U1), (S12, U2)] {
        a1[(r, c)] = -1.0;
        a1[(c, r)] = -1.0;
    }
    let mut a2 = DenseMatrix::zeros(m, m);
    for (r, c) in [(S22, U2), (S12, U1)] {
        a2[(r, c)] = -1.0;
        a2[(c, r)] = -1.0;
    }
    let first = vec![CoefficientField::constant(2, a1), CoefficientField::constant(2, a2)];

    let mut fixed = DenseMatrix::zeros(m, m);
    fixed[(S11, S11)] = 1.0;
    fixed[(S12, S12)] = 2.0;
    fixed[(S22, S22)] = 1.0;
    fixed[(S11, RHO)] = 1.0;
    fixed[(S22, RHO)] = 1.0;
    fixed[(RHO, S11)] = 1.0;
    fixed[(RHO, S22)] = 1.0;
    fixed[(RHO, RHO)] = 2.0;
    fixed[(U1, U1)] = gamma;
    fixed[(U2, U2)] = gamma;
    let mut ratio = DenseMatrix::zeros(m, m);
    ratio[(RHO, RHO)] = 2.0;
    let a0 = {
        let fixed = fixed.clone();
        let ratio = ratio.clone();
        CoefficientField::new(2, m, super::Smoothness::Constant, move |mu, _| {
            fixed.add(&ratio.scaled(mu[1] / mu[0])).expect("shape")
        })
    };
    let rhs_vec = {
        let mut v = vec![0.0; m];
        v[U1] = force[0];
        v[U2] = force[1];
        v
    };
    let expansion = SeparableExpansion {
        terms: vec![
            ExpansionTerm {
                label: "fixed".into(),
                theta: Arc::new(|_| 1.0),
                zeroth: Some(CoefficientField::constant(2, fixed)),
                first_order: Some(first.clone()),
                rhs: Some({
                    let r = rhs_vec.clone();
                    Arc::new(move |_, _| r.clone())
                }),
            },
            ExpansionTerm {
                label: "shear/lambda".into(),
                theta: Arc::new(|mu| mu[1] / mu[0]),
                zeroth: Some(CoefficientField::constant(2, ratio)),
                first_order: None,
                rhs: None,
            },
        ],
    };
    // Eigenvalues of the symmetric part: 2 and 4 (deviatoric), 2γ, and
    // 3 + t ± √((1+t)² + 8) on span{(σ11+σ22)/√2, ρ}, t = 2·shear/λ.
    let t = 2.0 * params.lower[1] / params.upper[0];
    let coupled = 3.0 + t - ((1.0 + t) * (1.0 + t) + 8.0).sqrt();
    let eps = 0.5 * (2.0 * gamma).min(2.0).min(coupled);
    Ok(FriedrichsSystem {
        id: "elasticity-2d".into(),
        d: 2,
        m,
        state_names: ["sigma11", "sigma12", "sigma22", "rho", "u1", "u2"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        domain: unit_box(2),
        n1: Some(n1_from_constant(&first)),
        a0,
        a: first,
        divergence: None,
        rhs: Arc::new(move |_, _| rhs_vec.clone()),
        boundary: BoundaryOperatorSpec::dirichlet(vec![S11, S12, S22], vec![U1, U2]),
        params,
        expansion: Some(expansion),
        declared_epsilon: eps,
        denseness_d1_d2: true,
        solve_supported: false,
        coefficient_tag: "linear-elasticity".into(),
        constants: raw.used(),
    })
}
