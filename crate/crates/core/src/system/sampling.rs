use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{linspace, tensor_points, FriedrichsSystem};
use crate::error::{Error, Result};

/// Sampling scheme for pointwise checks over `𝒫 × Ω` (or `𝒫 × ∂Ω`).
///
/// Points are the tensor grid with `per_axis` nodes per parameter and
/// spatial axis, followed by `random_points` uniform points. When
/// `random_params` is set, the random part is instead the product of that
/// many random parameters with `random_points` random spatial points each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplePlan {
    pub per_axis: usize,
    pub random_points: usize,
    pub random_params: Option<usize>,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            per_axis: 3,
            random_points: 256,
            random_params: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub mu: Vec<f64>,
    pub x: Vec<f64>,
    /// Outward normal for boundary samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal: Option<Vec<f64>>,
}

impl SamplePlan {
    pub fn check(&self) -> Result<()> {
        if self.per_axis < 2 {
            return Err(Error::invalid(format!(
                "sample plan needs at least 2 points per axis, got {}",
                self.per_axis
            )));
        }
        Ok(())
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Interior sample points over `𝒫 × Ω`.
    pub fn volume_points(&self, sys: &FriedrichsSystem) -> Result<Vec<SamplePoint>> {
        self.check()?;
        let mus = sys.params.grid(self.per_axis);
        let xaxes: Vec<Vec<f64>> = sys
            .domain
            .iter()
            .map(|&(a, b)| linspace(a, b, self.per_axis))
            .collect();
        let xs = tensor_points(&xaxes);
        let mut out = Vec::with_capacity(mus.len() * xs.len() + self.random_count());
        for mu in &mus {
            for x in &xs {
                out.push(SamplePoint {
                    mu: mu.clone(),
                    x: x.clone(),
                    normal: None,
                });
            }
        }
        let mut rng = self.rng(1);
        let random_x = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            sys.domain.iter().map(|&(a, b)| rng.random_range(a..=b)).collect()
        };
        match self.random_params {
            Some(np) => {
                let mus = sys.params.random_samples(np, &mut rng);
                for mu in mus {
                    for _ in 0..self.random_points {
                        let x = random_x(&mut rng);
                        out.push(SamplePoint {
                            mu: mu.clone(),
                            x,
                            normal: None,
                        });
                    }
                }
            }
            None => {
                for _ in 0..self.random_points {
                    let mu = sys.params.random_samples(1, &mut rng).pop().unwrap_or_default();
                    let x = random_x(&mut rng);
                    out.push(SamplePoint { mu, x, normal: None });
                }
            }
        }
        Ok(out)
    }

    /// Boundary sample points with outward normals. Corners contribute one
    /// point per adjacent face.
    pub fn boundary_points(&self, sys: &FriedrichsSystem) -> Result<Vec<SamplePoint>> {
        self.check()?;
        let d = sys.d;
        let mus = sys.params.grid(self.per_axis);
        let mut faces: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for axis in 0..d {
            for side in [0usize, 1] {
                let mut normal = vec![0.0; d];
                normal[axis] = if side == 0 { -1.0 } else { 1.0 };
                let mut axes: Vec<Vec<f64>> = sys
                    .domain
                    .iter()
                    .map(|&(a, b)| linspace(a, b, self.per_axis))
                    .collect();
                let (a, b) = sys.domain[axis];
                axes[axis] = vec![if side == 0 { a } else { b }];
                for x in tensor_points(&axes) {
                    faces.push((x, normal.clone()));
                }
            }
        }
        let mut out = Vec::new();
        for mu in &mus {
            for (x, n) in &faces {
                out.push(SamplePoint {
                    mu: mu.clone(),
                    x: x.clone(),
                    normal: Some(n.clone()),
                });
            }
        }
        let mut rng = self.rng(2);
        let mus: Vec<Vec<f64>> = match self.random_params {
            Some(np) => sys.params.random_samples(np, &mut rng),
            None => Vec::new(),
        };
        let mut random_boundary = |rng: &mut ChaCha8Rng, mu: Vec<f64>| {
            let axis = rng.random_range(0..d);
            let side = rng.random_range(0..2usize);
            let mut x: Vec<f64> = sys.domain.iter().map(|&(a, b)| rng.random_range(a..=b)).collect();
            let (a, b) = sys.domain[axis];
            x[axis] = if side == 0 { a } else { b };
            let mut normal = vec![0.0; d];
            normal[axis] = if side == 0 { -1.0 } else { 1.0 };
            out.push(SamplePoint {
                mu,
                x,
                normal: Some(normal),
            });
        };
        if mus.is_empty() {
            for _ in 0..self.random_points {
                let mu = sys.params.random_samples(1, &mut rng).pop().unwrap_or_default();
                random_boundary(&mut rng, mu);
            }
        } else {
            for mu in mus {
                for _ in 0..self.random_points {
                    random_boundary(&mut rng, mu.clone());
                }
            }
        }
        Ok(out)
    }

    fn random_count(&self) -> usize {
        self.random_points * self.random_params.unwrap_or(1)
    }
}
