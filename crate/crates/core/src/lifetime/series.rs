//! Series whose divergence decides whether the crossing times T_n run off to
//! infinity.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{RegimeBound, ThresholdRule};
use crate::reduce::CompensatedSum;

/// Which series is being summed (all start at k = 2).
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesFamily {
    /// sum log((y_k + k^(2 alpha) / 2) / (y_{k-1} + k^(2 alpha) / 2)), the crossing
    /// increments of dX = X dt + sum_n 1{g in [y_{n-1}, y_n)} n^alpha dB.
    ClosedForm { alpha: f64, thresholds: ThresholdRule },
    /// sum log(y_k / y_{k-1}) / (K_b + K_{sigma_k}^2)
    GrowthBound { drift: f64, diffusion: RegimeBound, thresholds: ThresholdRule },
    /// Arbitrary positive terms; only numerical evidence is possible.
    Generic,
}

/// A series with its term generator. For the tagged families the generator
/// is derived from the parameters.
pub struct SeriesSpec {
    pub family: SeriesFamily,
    generic_term: Option<Box<dyn Fn(usize) -> f64 + Send + Sync>>,
}

impl fmt::Debug for SeriesSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeriesSpec").field("family", &self.family).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Diverges,
    Converges,
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Diverges => "DIVERGES",
            Classification::Converges => "CONVERGES",
            Classification::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    /// partial_sums[i] = sum_{k=2}^{i+2} term(k)
    pub partial_sums: Vec<f64>,
    pub classification: Classification,
    /// The classification follows from the asymptotic form of the terms rather
    /// than from the partial sums alone.
    pub symbolic: bool,
    pub evidence: String,
}

impl SeriesReport {
    pub fn last_partial_sum(&self) -> Option<f64> {
        self.partial_sums.last().copied()
    }
}

/// term(k) ~ C k^exponent (ln k)^log_power
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotic {
    pub exponent: f64,
    pub log_power: f64,
}

impl Asymptotic {
    /// Integral test for sum k^e (ln k)^l.
    pub fn diverges(self) -> bool {
        self.exponent > -1.0 || (self.exponent == -1.0 && self.log_power >= -1.0)
    }
}

impl fmt::Display for Asymptotic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.log_power {
            0.0 => write!(f, "k^{}", self.exponent),
            l => write!(f, "k^{} (ln k)^{l}", self.exponent),
        }
    }
}

/// y_k - y_{k-1} without cancellation where the rule allows it.
fn increment(y: &ThresholdRule, k: usize) -> f64 {
    let km1 = (k - 1) as f64;
    match y {
        ThresholdRule::Power { scale, exponent } if k >= 2 => {
            scale * km1.powf(*exponent) * (exponent * (1.0 / km1).ln_1p()).exp_m1()
        }
        ThresholdRule::Geometric { scale, ratio } => scale * ratio.powf(km1) * (ratio - 1.0),
        _ => y.value(k) - y.value(k - 1),
    }
}

/// log((y_k + c) / (y_{k-1} + c)) for c >= 0, stable for huge y and for y << c.
pub(crate) fn shifted_log_ratio(y: &ThresholdRule, k: usize, c: f64) -> f64 {
    let ln_prev = y.ln_value(k - 1);
    if ln_prev < 600.0 && y.ln_value(k) < 700.0 {
        (increment(y, k) / (y.value(k - 1) + c)).ln_1p()
    } else {
        let lc = c.ln();
        y.ln_ratio(k) + (lc - y.ln_value(k)).exp().ln_1p() - (lc - ln_prev).exp().ln_1p()
    }
}

impl SeriesSpec {
    pub fn closed_form(alpha: f64, thresholds: ThresholdRule) -> Self {
        Self { family: SeriesFamily::ClosedForm { alpha, thresholds }, generic_term: None }
    }

    pub fn growth_bound(drift: f64, diffusion: RegimeBound, thresholds: ThresholdRule) -> Self {
        Self { family: SeriesFamily::GrowthBound { drift, diffusion, thresholds }, generic_term: None }
    }

    pub fn generic(term: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self { family: SeriesFamily::Generic, generic_term: Some(Box::new(term)) }
    }

    /// k-th term, k >= 2.
    pub fn term(&self, k: usize) -> f64 {
        match &self.family {
            SeriesFamily::ClosedForm { alpha, thresholds } => {
                shifted_log_ratio(thresholds, k, 0.5 * (k as f64).powf(2.0 * alpha))
            }
            SeriesFamily::GrowthBound { drift, diffusion, thresholds } => {
                let kappa = diffusion.at(k).unwrap_or(f64::NAN);
                thresholds.ln_ratio(k) / (drift + kappa * kappa)
            }
            SeriesFamily::Generic => (self.generic_term.as_ref().expect("generic series has a term"))(k),
        }
    }

    /// Number of available terms, `None` if infinite.
    fn term_count(&self) -> Option<usize> {
        match &self.family {
            SeriesFamily::ClosedForm { thresholds, .. } | SeriesFamily::GrowthBound { thresholds, .. } => {
                thresholds.len().map(|n| n.saturating_sub(1))
            }
            SeriesFamily::Generic => None,
        }
    }

    /// Asymptotic form of the terms for recognized families.
    pub fn asymptotic(&self) -> Option<Asymptotic> {
        // (exponent, log power) of log(y_k / y_{k-1}), and the growth exponent of y_k
        let ratio_form = |y: &ThresholdRule| match y {
            ThresholdRule::Power { .. } => Some((-1.0, 0.0)),
            ThresholdRule::Geometric { .. } => Some((0.0, 0.0)),
            // log k! + (k - 1) log k ~ 2 k log k
            ThresholdRule::FactorialPower => Some((1.0, 1.0)),
            ThresholdRule::Explicit { .. } => None,
        };
        match &self.family {
            SeriesFamily::ClosedForm { alpha, thresholds } => match thresholds {
                ThresholdRule::Power { exponent: beta, .. } => {
                    // log(1 + Dy / (y + k^(2a)/2)) ~ k^(beta - 1) / k^max(beta, 2a)
                    Some(Asymptotic { exponent: beta - 1.0 - beta.max(2.0 * alpha), log_power: 0.0 })
                }
                // y_k dominates k^(2a), so the terms behave like log(y_k / y_{k-1})
                ThresholdRule::Geometric { .. } | ThresholdRule::FactorialPower => {
                    ratio_form(thresholds).map(|(e, l)| Asymptotic { exponent: e, log_power: l })
                }
                ThresholdRule::Explicit { .. } => None,
            },
            SeriesFamily::GrowthBound { diffusion, thresholds, .. } => {
                let (e, l) = ratio_form(thresholds)?;
                let gamma = match diffusion {
                    RegimeBound::PowerLaw { exponent, .. } => exponent.max(0.0),
                    RegimeBound::PerRegime { .. } => return None,
                };
                Some(Asymptotic { exponent: e - 2.0 * gamma, log_power: l })
            }
            SeriesFamily::Generic => None,
        }
    }

    fn check_parameters(&self) -> Result<()> {
        match &self.family {
            SeriesFamily::ClosedForm { alpha, .. } if !(*alpha > 0.0) => {
                Err(Error::domain(format!("alpha must be positive, got {alpha}")))
            }
            SeriesFamily::GrowthBound { drift, .. } if !(*drift > 0.0) => {
                Err(Error::domain(format!("K_b must be positive, got {drift}")))
            }
            _ => Ok(()),
        }
    }
}

/// Partial sums S_N for N = 2..=n_max and a classification.
///
/// Recognized families are classified from the asymptotic form of their terms.
/// A generic series is only called divergent when its partial sums exceed
/// `divergence_threshold`, which is evidence rather than proof.
pub fn classify_series(series: &SeriesSpec, n_max: usize, divergence_threshold: f64) -> Result<SeriesReport> {
    series.check_parameters()?;
    let last = series.term_count().map_or(n_max, |c| n_max.min(c + 1));
    let mut acc = CompensatedSum::default();
    let mut partial_sums = Vec::with_capacity(last.saturating_sub(1));
    for k in 2..=last {
        let term = series.term(k);
        if !(term > 0.0) || !term.is_finite() {
            return Err(Error::domain(format!("term {k} is {term}, terms must be positive and finite")));
        }
        acc.add(term);
        partial_sums.push(acc.value());
    }
    let reached = partial_sums.last().copied().unwrap_or(0.0);

    if series.term_count().is_some() {
        return Ok(SeriesReport {
            partial_sums,
            classification: Classification::Inconclusive,
            symbolic: false,
            evidence: "finitely many thresholds: the sum is finite and says nothing about T_max".into(),
        });
    }
    if let Some(form) = series.asymptotic() {
        let classification = if form.diverges() { Classification::Diverges } else { Classification::Converges };
        let evidence = format!(
            "terms ~ {form}; the series {} by comparison with sum {form}",
            if form.diverges() { "diverges" } else { "converges" }
        );
        return Ok(SeriesReport { partial_sums, classification, symbolic: true, evidence });
    }
    let (classification, evidence) = if reached > divergence_threshold {
        (
            Classification::Diverges,
            format!("evidence only: partial sum {reached} exceeds threshold {divergence_threshold} after {last} terms"),
        )
    } else {
        (Classification::Inconclusive, format!("partial sum {reached} after {last} terms; no asymptotic form known"))
    };
    Ok(SeriesReport { partial_sums, classification, symbolic: false, evidence })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_linear() -> ThresholdRule {
        ThresholdRule::linear()
    }

    #[test]
    fn reference_verdicts() {
        let half = classify_series(&SeriesSpec::closed_form(0.5, k_linear()), 1000, 1e6).unwrap();
        assert_eq!(half.classification, Classification::Diverges);
        let one = classify_series(&SeriesSpec::closed_form(1.0, k_linear()), 1000, 1e6).unwrap();
        assert_eq!(one.classification, Classification::Converges);
        let fact = SeriesSpec::growth_bound(
            1.0,
            RegimeBound::PowerLaw { scale: 1.0, exponent: 1.0 },
            ThresholdRule::FactorialPower,
        );
        let r = classify_series(&fact, 1000, 1e6).unwrap();
        assert_eq!(r.classification, Classification::Diverges);
        assert!(r.symbolic);
    }

    #[test]
    fn closed_form_terms_match_direct_formula() {
        // y_k = k: log((2k + k^(2a)) / (2k - 2 + k^(2a))) = log1p(2 / (2k - 2 + k^(2a)))
        let s = SeriesSpec::closed_form(0.75, k_linear());
        for k in 2..200 {
            let kf = k as f64;
            let c = kf.powf(1.5);
            let direct = (2.0 / (2.0 * kf - 2.0 + c)).ln_1p();
            assert!((s.term(k) - direct).abs() <= 1e-14 * direct, "k = {k}: {} vs {direct}", s.term(k));
        }
    }

    #[test]
    fn factorial_terms_stay_finite() {
        let s = SeriesSpec::closed_form(1.0, ThresholdRule::FactorialPower);
        for k in [2, 10, 30, 200, 5000] {
            let t = s.term(k);
            assert!(t.is_finite() && t > 0.0, "k = {k}: {t}");
        }
        // k = 2: log((2^2 + 2) / (1 + 2))
        let t2 = s.term(2);
        assert!((t2 - 2f64.ln()).abs() < 1e-14, "{t2}");
    }

    #[test]
    fn growth_bound_below_closed_form_threshold() {
        // alpha <= 1/2 with y_k = k: the growth series converges while the closed form diverges
        let s = SeriesSpec::growth_bound(1.0, RegimeBound::PowerLaw { scale: 1.0, exponent: 0.5 }, k_linear());
        assert_eq!(classify_series(&s, 100, 1e6).unwrap().classification, Classification::Converges);
    }

    #[test]
    fn telescoping_sum() {
        let (kb, kk) = (1.0, 2.0);
        let s = SeriesSpec::growth_bound(kb, RegimeBound::PowerLaw { scale: kk, exponent: 0.0 }, k_linear());
        let r = classify_series(&s, 100_000, 1e300).unwrap();
        let expected = (100_000f64.ln() - 1f64.ln()) / (kb + kk * kk);
        assert!((r.last_partial_sum().unwrap() - expected).abs() < 1e-12);
        assert_eq!(r.classification, Classification::Diverges);
    }

    #[test]
    fn generic_series() {
        let harmonic = SeriesSpec::generic(|k| 1.0 / k as f64);
        let r = classify_series(&harmonic, 10_000, 5.0).unwrap();
        assert_eq!(r.classification, Classification::Diverges);
        assert!(!r.symbolic);
        assert!(r.evidence.starts_with("evidence only"));
        let squares = SeriesSpec::generic(|k| 1.0 / (k * k) as f64);
        assert_eq!(classify_series(&squares, 10_000, 5.0).unwrap().classification, Classification::Inconclusive);
        let bad = SeriesSpec::generic(|k| if k == 5 { 0.0 } else { 1.0 });
        assert!(matches!(classify_series(&bad, 10, 5.0), Err(Error::Domain(_))));
    }

    #[test]
    fn finite_threshold_lists_are_inconclusive() {
        let s = SeriesSpec::closed_form(1.0, ThresholdRule::Explicit { values: vec![1.0, 2.0, 3.0] });
        let r = classify_series(&s, 100, 1e6).unwrap();
        assert_eq!(r.classification, Classification::Inconclusive);
        assert_eq!(r.partial_sums.len(), 2);
    }
}
