use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Threshold sequence y_1 < y_2 < ... with y_0 = 0 implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Finite list of thresholds.
    Explicit { values: Vec<f64> },
    /// y_k = scale * k^exponent
    Power { scale: f64, exponent: f64 },
    /// y_k = scale * ratio^k
    Geometric { scale: f64, ratio: f64 },
    /// y_k = (k!)^k
    FactorialPower,
}

impl ThresholdRule {
    pub fn linear() -> Self {
        ThresholdRule::Power { scale: 1.0, exponent: 1.0 }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ThresholdRule::Explicit { .. })
    }

    /// Number of thresholds, `None` when the sequence is infinite.
    pub fn len(&self) -> Option<usize> {
        match self {
            ThresholdRule::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// y_k for k >= 1, y_0 = 0. Past the end of a finite list this is +inf.
    pub fn value(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match self {
            ThresholdRule::Explicit { values } => values.get(k - 1).copied().unwrap_or(f64::INFINITY),
            ThresholdRule::Power { scale, exponent } => scale * (k as f64).powf(*exponent),
            ThresholdRule::Geometric { scale, ratio } => scale * ratio.powf(k as f64),
            ThresholdRule::FactorialPower => self.ln_value(k).exp(),
        }
    }

    /// ln y_k, finite even where y_k itself overflows.
    pub fn ln_value(&self, k: usize) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        match self {
            ThresholdRule::Explicit { .. } => self.value(k).ln(),
            ThresholdRule::Power { scale, exponent } => scale.ln() + exponent * (k as f64).ln(),
            ThresholdRule::Geometric { scale, ratio } => scale.ln() + (k as f64) * ratio.ln(),
            ThresholdRule::FactorialPower => (k as f64) * ln_gamma(k as f64 + 1.0),
        }
    }

    /// ln(y_k / y_{k-1}) for k >= 2, evaluated without cancellation.
    pub fn ln_ratio(&self, k: usize) -> f64 {
        debug_assert!(k >= 2);
        let kf = k as f64;
        match self {
            ThresholdRule::Explicit { .. } => (self.value(k) / self.value(k - 1)).ln(),
            ThresholdRule::Power { exponent, .. } => exponent * (1.0 / (kf - 1.0)).ln_1p(),
            ThresholdRule::Geometric { ratio, .. } => ratio.ln(),
            // k ln k! - (k-1) ln (k-1)! = ln k! + (k-1) ln k
            ThresholdRule::FactorialPower => ln_gamma(kf + 1.0) + (kf - 1.0) * kf.ln(),
        }
    }

    /// #{k >= 1 : y_k < alpha}.
    pub fn count_below(&self, alpha: f64) -> usize {
        match self {
            ThresholdRule::Explicit { values } => values.partition_point(|&y| y < alpha),
            _ => {
                let mut k = self.count_hint(alpha);
                while k > 0 && self.value(k) >= alpha {
                    k -= 1;
                }
                while self.value(k + 1) < alpha {
                    k += 1;
                }
                k
            }
        }
    }

    fn count_hint(&self, alpha: f64) -> usize {
        const CAP: f64 = 1e15;
        let raw = match self {
            ThresholdRule::Power { scale, exponent } => (alpha / scale).powf(1.0 / exponent),
            ThresholdRule::Geometric { scale, ratio } => (alpha / scale).ln() / ratio.ln(),
            _ => 0.0,
        };
        if raw.is_finite() && raw > 0.0 {
            raw.min(CAP).floor() as usize
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySide {
    /// y_k belongs to regime k (A_k closed on the right).
    Lower,
    /// y_k belongs to regime k + 1 (A_k = [y_{k-1}, y_k)).
    Upper,
}

/// Partition of [0, inf) into regime cells.
///
/// Interval cells come from the threshold sequence: cell k is bounded by
/// y_{k-1} and y_k. Every threshold belongs to the upper cell unless listed in
/// `boundary_to_lower`. `atoms` are single-point cells {c}; they are numbered
/// after the interval cells and are only allowed with a finite threshold list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPartition {
    pub thresholds: ThresholdRule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary_to_lower: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<f64>,
}

impl ThresholdPartition {
    pub fn new(thresholds: ThresholdRule) -> Self {
        Self { thresholds, boundary_to_lower: Vec::new(), atoms: Vec::new() }
    }

    /// Two-regime partition at level `y` with A_1 = [0, y).
    pub fn two_regime(y: f64) -> Self {
        Self::new(ThresholdRule::Explicit { values: vec![y] })
    }

    /// Assign y_k to the lower regime (A_k = [y_{k-1}, y_k]).
    pub fn with_lower_boundary(mut self, k: usize) -> Self {
        if !self.boundary_to_lower.contains(&k) {
            self.boundary_to_lower.push(k);
            self.boundary_to_lower.sort_unstable();
        }
        self
    }

    pub fn with_atom(mut self, value: f64) -> Self {
        self.atoms.push(value);
        self
    }

    pub fn side(&self, k: usize) -> BoundarySide {
        if self.boundary_to_lower.contains(&k) {
            BoundarySide::Lower
        } else {
            BoundarySide::Upper
        }
    }

    pub fn threshold(&self, k: usize) -> f64 {
        self.thresholds.value(k)
    }

    /// Number of interval cells (thresholds + 1), `None` if infinite.
    pub fn interval_cells(&self) -> Option<usize> {
        self.thresholds.len().map(|n| n + 1)
    }

    /// Total number of regimes, `None` for countably many.
    pub fn regime_count(&self) -> Option<usize> {
        self.interval_cells().map(|n| n + self.atoms.len())
    }

    /// Interval cell containing alpha, ignoring atoms.
    pub fn cell_of(&self, alpha: f64) -> usize {
        let below = self.thresholds.count_below(alpha);
        let k = below + 1;
        let on_boundary = self.thresholds.value(k) == alpha;
        if on_boundary && self.side(k) == BoundarySide::Upper {
            below + 2
        } else {
            below + 1
        }
    }

    /// Regime index (1-based) of the cell containing alpha.
    pub fn regime_of(&self, alpha: f64) -> Result<usize> {
        if !alpha.is_finite() {
            return Err(Error::domain(format!("moment value {alpha} is not finite")));
        }
        if alpha < 0.0 {
            return Err(Error::domain(format!("moment value {alpha} is negative")));
        }
        if let Some(j) = self.atoms.iter().position(|&c| c == alpha) {
            if let Some(n) = self.interval_cells() {
                return Ok(n + j + 1);
            }
        }
        Ok(self.cell_of(alpha))
    }

    /// Crossing label of atom j (0-based): atoms are numbered after the thresholds.
    pub fn atom_label(&self, j: usize) -> usize {
        self.thresholds.len().unwrap_or(0) + j + 1
    }

    pub(crate) fn violations(&self, out: &mut Vec<String>) {
        match &self.thresholds {
            ThresholdRule::Explicit { values } => {
                if values.iter().any(|y| !y.is_finite()) {
                    out.push("thresholds must be finite".into());
                }
                if values.first().is_some_and(|&y| y <= 0.0) {
                    out.push("thresholds must be positive (y_0 = 0 is implicit)".into());
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    out.push("thresholds not increasing".into());
                }
            }
            ThresholdRule::Power { scale, exponent } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    out.push("power thresholds need a positive finite scale".into());
                }
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    out.push("power thresholds need a positive exponent to diverge".into());
                }
            }
            ThresholdRule::Geometric { scale, ratio } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    out.push("geometric thresholds need a positive finite scale".into());
                }
                if !(*ratio > 1.0 && ratio.is_finite()) {
                    out.push("geometric thresholds need ratio > 1 to diverge".into());
                }
            }
            ThresholdRule::FactorialPower => {}
        }
        if let Some(n) = self.thresholds.len() {
            if let Some(&k) = self.boundary_to_lower.iter().find(|&&k| k == 0 || k > n) {
                out.push(format!("boundary override refers to missing threshold {k}"));
            }
        } else if self.boundary_to_lower.contains(&0) {
            out.push("boundary override refers to missing threshold 0".into());
        }
        if !self.atoms.is_empty() {
            if !self.thresholds.is_finite() {
                out.push("point cells require a finite threshold list".into());
            }
            for (j, &c) in self.atoms.iter().enumerate() {
                if !(c.is_finite() && c >= 0.0) {
                    out.push(format!("point cell {c} must be finite and nonnegative"));
                }
                if self.atoms[..j].contains(&c) {
                    out.push(format!("point cell {c} listed twice"));
                }
                if let ThresholdRule::Explicit { values } = &self.thresholds {
                    if values.contains(&c) {
                        out.push(format!("point cell {c} coincides with a threshold"));
                    }
                }
            }
        }
    }
}
