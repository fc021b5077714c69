use serde::{Deserialize, Serialize};

use crate::reduce::pairwise_sum;
use crate::rng::{CounterRng, Domain};

/// Sample size used when E||x_0 - z||^p has no closed form.
const MOMENT_SAMPLE: u32 = 1 << 18;

/// Law of x_0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    /// x_0 = point almost surely.
    Dirac { point: Vec<f64> },
    /// Independent Gaussian components.
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
    /// Uniform over a finite list of points.
    Discrete { points: Vec<Vec<f64>> },
}

/// m_0 = E(x_0 - z) and M_0 = E||x_0 - z||^p.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialMoments {
    pub mean: Vec<f64>,
    pub p_moment: f64,
    pub exact: bool,
}

fn norm_sq(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl InitialLaw {
    pub fn dirac(point: Vec<f64>) -> Self {
        InitialLaw::Dirac { point }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Dirac { point } => point.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::Discrete { points } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            InitialLaw::Dirac { .. } => true,
            InitialLaw::Gaussian { variance, .. } => variance.iter().all(|&v| v == 0.0),
            InitialLaw::Discrete { points } => points.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Draws x_0 for `particle` into `out`.
    pub fn sample(&self, rng: &CounterRng, particle: u32, out: &mut [f64]) {
        match self {
            InitialLaw::Dirac { point } => out.copy_from_slice(point),
            InitialLaw::Gaussian { mean, variance } => {
                rng.normals(0, particle, out);
                for ((o, m), v) in out.iter_mut().zip(mean).zip(variance) {
                    *o = m + v.sqrt() * *o;
                }
            }
            InitialLaw::Discrete { points } => {
                let mut u = [0.0];
                rng.uniforms(0, particle, &mut u);
                let j = ((u[0] * points.len() as f64) as usize).min(points.len() - 1);
                out.copy_from_slice(&points[j]);
            }
        }
    }

    pub fn moments(&self, z: &[f64], p: f64) -> InitialMoments {
        let d = z.len();
        match self {
            InitialLaw::Dirac { point } => {
                let sq = norm_sq(point, z);
                InitialMoments {
                    mean: point.iter().zip(z).map(|(a, b)| a - b).collect(),
                    p_moment: if p == 2.0 { sq } else { sq.powf(0.5 * p) },
                    exact: true,
                }
            }
            InitialLaw::Discrete { points } => {
                let n = points.len() as f64;
                let mut mean = vec![0.0; d];
                for x in points {
                    for (m, (a, b)) in mean.iter_mut().zip(x.iter().zip(z)) {
                        *m += (a - b) / n;
                    }
                }
                let vals: Vec<f64> = points
                    .iter()
                    .map(|x| {
                        let sq = norm_sq(x, z);
                        if p == 2.0 {
                            sq
                        } else {
                            sq.powf(0.5 * p)
                        }
                    })
                    .collect();
                InitialMoments { mean, p_moment: pairwise_sum(&vals) / n, exact: true }
            }
            InitialLaw::Gaussian { mean, variance } => {
                let offset: Vec<f64> = mean.iter().zip(z).map(|(a, b)| a - b).collect();
                if p == 2.0 {
                    let m2 = offset.iter().map(|m| m * m).sum::<f64>() + variance.iter().sum::<f64>();
                    return InitialMoments { mean: offset, p_moment: m2, exact: true };
                }
                let rng = CounterRng::new(0x0005_EED0_F1A7, Domain::Auxiliary);
                let mut x = vec![0.0; d];
                let vals: Vec<f64> = (0..MOMENT_SAMPLE)
                    .map(|i| {
                        self.sample(&rng, i, &mut x);
                        norm_sq(&x, z).powf(0.5 * p)
                    })
                    .collect();
                InitialMoments { mean: offset, p_moment: pairwise_sum(&vals) / MOMENT_SAMPLE as f64, exact: false }
            }
        }
    }

    pub(crate) fn violations(&self, d: usize, out: &mut Vec<String>) {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            InitialLaw::Dirac { point } => {
                if !finite(point) {
                    out.push("initial point must be finite".into());
                }
            }
            InitialLaw::Gaussian { mean, variance } => {
                if mean.len() != variance.len() {
                    out.push("initial mean and variance have different lengths".into());
                }
                if !finite(mean) || variance.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    out.push("initial Gaussian needs finite mean and nonnegative variance".into());
                }
            }
            InitialLaw::Discrete { points } => {
                if points.is_empty() {
                    out.push("initial point list is empty".into());
                }
                if points.iter().any(|x| x.len() != d || !finite(x)) {
                    out.push("initial points must be finite and match the dimension".into());
                }
            }
        }
        if self.dim() != d {
            out.push(format!("initial law has dimension {} but d = {d}", self.dim()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_moment_is_exact() {
        let m = InitialLaw::dirac(vec![3.0, 4.0]).moments(&[0.0, 0.0], 3.0);
        assert!(m.exact);
        assert!((m.p_moment - 125.0).abs() < 1e-12);
        assert_eq!(m.mean, vec![3.0, 4.0]);
    }

    #[test]
    fn gaussian_second_moment() {
        let law = InitialLaw::Gaussian { mean: vec![1.0 - 2f64.sqrt()], variance: vec![2.0 * (2f64.sqrt() - 1.0)] };
        let m = law.moments(&[0.0], 2.0);
        assert!((m.p_moment - 1.0).abs() < 1e-15);
        assert!(m.exact);
    }

    #[test]
    fn gaussian_fourth_moment_is_estimated() {
        // E|N(0,1)|^4 = 3
        let law = InitialLaw::Gaussian { mean: vec![0.0], variance: vec![1.0] };
        let m = law.moments(&[0.0], 4.0);
        assert!(!m.exact);
        assert!((m.p_moment - 3.0).abs() < 0.05);
    }

    #[test]
    fn discrete_law() {
        let law = InitialLaw::Discrete { points: vec![vec![0.0], vec![2.0]] };
        let m = law.moments(&[0.0], 2.0);
        assert_eq!(m.p_moment, 2.0);
        assert_eq!(m.mean, vec![1.0]);
    }
}
