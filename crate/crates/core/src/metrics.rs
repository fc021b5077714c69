//! Empirical laws, p-Wasserstein distances and the coupling inequality
//! W_p(P_f, P_g)^p <= E||f - g||^p.

use crate::error::{Error, Result};
use crate::reduce::pairwise_sum;

/// N points in R^d with uniform weights, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    dim: usize,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("sample dimension must be positive"));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::domain(format!(
                "sample needs a positive multiple of d = {dim} entries, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample entry at index {i}")));
        }
        Ok(Self { values, dim })
    }

    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("p must be in [1, inf), got {p}")))
    }
}

fn mean_pow(diffs: impl Iterator<Item = f64>, n: usize, p: f64) -> f64 {
    let terms: Vec<f64> = diffs.map(|d| if p == 2.0 { d * d } else { d.abs().powf(p) }).collect();
    pairwise_sum(&terms) / n as f64
}

/// W_p between two equal-size empirical laws on the line, realized by the
/// sorted coupling.
pub fn wasserstein_1d(a: &EmpiricalSample, b: &EmpiricalSample, p: f64) -> Result<f64> {
    check_p(p)?;
    if a.dim != 1 || b.dim != 1 {
        return Err(Error::unsupported("W_p between general laws is only available in d = 1"));
    }
    if a.len() != b.len() {
        return Err(Error::domain(format!("sample sizes differ: {} vs {}", a.len(), b.len())));
    }
    let (sa, sb) = (a.sorted(), b.sorted());
    let m = mean_pow(sa.iter().zip(&sb).map(|(x, y)| x - y), a.len(), p);
    Ok(m.powf(1.0 / p))
}

/// W_p(sample, delta_z) = (mean ||x_j - z||^p)^(1/p), any dimension.
pub fn wasserstein_to_dirac(sample: &EmpiricalSample, z: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    if z.len() != sample.dim {
        return Err(Error::domain(format!("z has length {}, sample dimension is {}", z.len(), sample.dim)));
    }
    let norms = (0..sample.len()).map(|j| {
        sample.point(j).iter().zip(z).map(|(x, c)| (x - c) * (x - c)).sum::<f64>().sqrt()
    });
    Ok(mean_pow(norms, sample.len(), p).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCheck {
    pub holds: bool,
    /// E|f - g|^p - W_p(P_f, P_g)^p
    pub slack: f64,
    pub coupled_cost: f64,
    pub optimal_cost: f64,
}

/// Compares the cost of the given pairing with the optimal one in d = 1.
pub fn coupling_inequality_check(f: &[f64], g: &[f64], p: f64) -> Result<CouplingCheck> {
    check_p(p)?;
    if f.len() != g.len() || f.is_empty() {
        return Err(Error::domain("coupled samples must be nonempty and of equal length"));
    }
    let a = EmpiricalSample::scalar(f.to_vec())?;
    let b = EmpiricalSample::scalar(g.to_vec())?;
    let coupled_cost = mean_pow(f.iter().zip(g).map(|(x, y)| x - y), f.len(), p);
    let (sa, sb) = (a.sorted(), b.sorted());
    let optimal_cost = mean_pow(sa.iter().zip(&sb).map(|(x, y)| x - y), f.len(), p);
    let slack = coupled_cost - optimal_cost;
    let tol = 1e-12 * coupled_cost.max(optimal_cost).max(1.0);
    Ok(CouplingCheck { holds: slack >= -tol, slack, coupled_cost, optimal_cost })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> EmpiricalSample {
        EmpiricalSample::scalar(v.to_vec()).unwrap()
    }

    #[test]
    fn small_cases() {
        assert_eq!(wasserstein_1d(&s(&[1.0, 3.0]), &s(&[2.0, 4.0]), 1.0).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&s(&[3.0, 1.0]), &s(&[3.0, 1.0]), 2.0).unwrap(), 0.0);
        assert!((wasserstein_1d(&s(&[0.0, 2.0]), &s(&[0.0, 0.0]), 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((wasserstein_to_dirac(&s(&[0.0, 2.0]), &[0.0], 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(wasserstein_to_dirac(&s(&[5.0, 5.0]), &[5.0], 3.0).unwrap(), 0.0);
    }

    #[test]
    fn dirac_distance_in_higher_dimension() {
        let x = EmpiricalSample::new(vec![3.0, 4.0, 0.0, 0.0], 2).unwrap();
        // norms 5 and 0, p = 1
        assert_eq!(wasserstein_to_dirac(&x, &[0.0, 0.0], 1.0).unwrap(), 2.5);
        assert!(matches!(wasserstein_1d(&x, &x, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn refusals() {
        assert!(EmpiricalSample::scalar(vec![]).is_err());
        assert!(EmpiricalSample::scalar(vec![f64::NAN]).is_err());
        assert!(EmpiricalSample::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(wasserstein_1d(&s(&[1.0]), &s(&[1.0, 2.0]), 1.0).is_err());
        assert!(wasserstein_1d(&s(&[1.0]), &s(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn shift_coupling_is_optimal() {
        let f = [0.3, -1.0, 2.5, 0.0];
        let g: Vec<f64> = f.iter().map(|x| x + 0.75).collect();
        let c = coupling_inequality_check(&f, &g, 2.0).unwrap();
        assert!(c.holds && c.slack.abs() < 1e-15);
        let same = coupling_inequality_check(&f, &f, 1.0).unwrap();
        assert_eq!(same.slack, 0.0);
    }

    #[test]
    fn crossed_pairing_has_positive_slack() {
        let c = coupling_inequality_check(&[0.0, 1.0], &[1.0, 0.0], 2.0).unwrap();
        assert!(c.holds);
        assert_eq!(c.slack, 1.0);
    }
}
