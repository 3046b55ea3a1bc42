use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::csv_float;

/// Relative errors at or below this level count as exact recovery and are
/// left out of the fit.
pub const ZERO_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Fitted,
    /// The errors vanish before two positive values are available; `β = +∞`.
    ExactRecovery,
    /// Fewer than two positive errors and none vanishing.
    Insufficient,
}

/// Least-squares fit of `log e_N = log α − β N^{1/Q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(with = "nonfinite")]
    pub alpha: f64,
    #[serde(with = "nonfinite")]
    pub beta: f64,
    /// Coefficient of determination of the log-linear fit.
    #[serde(with = "nonfinite")]
    pub r_squared: f64,
    pub points: usize,
    /// Some error reached [`ZERO_FLOOR`].
    pub reached_floor: bool,
    pub status: FitStatus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: Vec<usize>,
    /// `e_N / e₀`.
    pub errors: Vec<f64>,
    /// `e₀`.
    pub scale: f64,
    pub q_b: usize,
    pub modes: usize,
    pub rank_deficient: bool,
    pub fit: DecayFit,
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,e_N\n");
        for (n, e) in self.n.iter().zip(&self.errors) {
            out.push_str(&format!("{n},{}\n", csv_float(*e)));
        }
        out
    }
}

pub fn fit_decay(n: &[usize], errors: &[f64], q_b: usize) -> DecayFit {
    let q = q_b.max(1) as f64;
    let reached_floor = errors.iter().any(|&e| e <= ZERO_FLOOR);
    let pts: Vec<(f64, f64)> = n
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > ZERO_FLOOR)
        .map(|(&k, &e)| ((k as f64).powf(1.0 / q), e.ln()))
        .collect();
    if pts.len() < 2 {
        let alpha = pts.first().map_or(f64::NAN, |p| p.1.exp());
        let (beta, status) = if reached_floor {
            (f64::INFINITY, FitStatus::ExactRecovery)
        } else {
            (f64::NAN, FitStatus::Insufficient)
        };
        return DecayFit {
            alpha,
            beta,
            r_squared: f64::NAN,
            points: pts.len(),
            reached_floor,
            status,
        };
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    DecayFit {
        alpha: intercept.exp(),
        beta: -slope,
        r_squared,
        points: pts.len(),
        reached_floor,
        status: FitStatus::Fitted,
    }
}

/// JSON has no infinities; non-finite floats travel as strings.
pub(crate) mod nonfinite {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("+inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "+inf" | "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not a float: {other}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_exponential() {
        let n: Vec<usize> = (1..=10).collect();
        let e: Vec<f64> = n.iter().map(|&k| 3.0 * (-0.7 * (k as f64).sqrt()).exp()).collect();
        let f = fit_decay(&n, &e, 2);
        assert!((f.alpha - 3.0).abs() < 1e-12 && (f.beta - 0.7).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.status, FitStatus::Fitted);
    }

    #[test]
    fn zero_errors_flag_infinite_rate() {
        let f = fit_decay(&[1, 2], &[0.0, 0.0], 1);
        assert_eq!(f.status, FitStatus::ExactRecovery);
        assert_eq!(f.beta, f64::INFINITY);
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"+inf\""));
        let back: DecayFit = serde_json::from_str(&json).unwrap();
        assert_eq!(back.beta, f64::INFINITY);
        assert_eq!(fit_decay(&[1], &[0.5], 1).status, FitStatus::Insufficient);
    }

    #[test]
    fn floor_values_are_skipped() {
        let f = fit_decay(&[1, 2, 3, 4], &[1e-1, 1e-2, 1e-3, 1e-16], 1);
        assert_eq!(f.points, 3);
        assert!(f.reached_floor);
        assert!((f.beta - 10f64.ln()).abs() < 1e-12);
    }
}
