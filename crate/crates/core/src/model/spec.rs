use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::coefficients::{CoefficientFamily, Diffusion, DiffusionFamily, Drift, RegimeCoefficients};
use super::initial::{InitialLaw, InitialMoments};
use super::partition::ThresholdPartition;
use crate::error::{Error, Result};

/// One switched mean-field SDE
///
/// ```text
/// dX = sum_i 1{g(t) in A_i} sigma_i(t, X, g) dB + b(t, X, g) dt,   g(t) = E||X_t - z||^p
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub p: f64,
    pub dim: usize,
    pub z: Vec<f64>,
    pub partition: ThresholdPartition,
    pub coefficients: RegimeCoefficients,
    pub initial: InitialLaw,
}

/// Outcome of [`validate`]. Empty `violations` means the spec is usable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  error: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

fn diffusion_violations(sigma: &Diffusion, d: usize, regime: usize, out: &mut Vec<String>) {
    match sigma {
        Diffusion::Scalar { value } if !value.is_finite() => {
            out.push(format!("diffusion of regime {regime} is not finite"));
        }
        Diffusion::Matrix { rows } => {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                out.push(format!("diffusion matrix of regime {regime} is not {d} x {d}"));
            }
        }
        Diffusion::PiecewiseScalar { breaks, values } => {
            if values.len() != breaks.len() + 1 {
                out.push(format!("piecewise diffusion of regime {regime} needs one more value than breaks"));
            }
            if breaks.windows(2).any(|w| w[0] >= w[1]) {
                out.push(format!("piecewise diffusion breaks of regime {regime} not increasing"));
            }
        }
        _ => {}
    }
}

/// Checks every structural invariant of a spec.
pub fn validate(spec: &EquationSpec) -> ValidationReport {
    let mut v = Vec::new();
    let mut w = Vec::new();
    let d = spec.dim;

    if !(spec.p >= 2.0) || !spec.p.is_finite() {
        v.push("p < 2".to_string());
    }
    if d == 0 {
        v.push("dimension must be at least 1".into());
    }
    if spec.z.len() != d {
        v.push(format!("reference point has length {} but d = {d}", spec.z.len()));
    }
    if spec.z.iter().any(|x| !x.is_finite()) {
        v.push("reference point must be finite".into());
    }

    spec.partition.violations(&mut v);

    let coeffs = &spec.coefficients;
    match (&coeffs.diffusion, spec.partition.regime_count()) {
        (DiffusionFamily::PerRegime { regimes }, Some(n)) if regimes.len() != n => {
            v.push(format!("partition has {n} regimes but {} diffusion coefficients are given", regimes.len()));
        }
        (DiffusionFamily::PerRegime { .. }, None) => {
            v.push("countably many regimes need an indexed diffusion family".into());
        }
        (DiffusionFamily::PowerLaw { scale, exponent }, _) if !scale.is_finite() || !exponent.is_finite() => {
            v.push("power-law diffusion needs finite scale and exponent".into());
        }
        _ => {}
    }
    if let DiffusionFamily::PerRegime { regimes } = &coeffs.diffusion {
        for (i, s) in regimes.iter().enumerate() {
            diffusion_violations(s, d, i + 1, &mut v);
        }
    }
    if let Some(dd) = coeffs.drift.dim() {
        if dd != d {
            v.push(format!("drift has dimension {dd} but d = {d}"));
        }
    }
    if let Drift::InverseSqrtRamp { cutoff, .. } = coeffs.drift {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            v.push("ramp drift cutoff must lie in (0, 1)".into());
        }
    }
    if coeffs.growth.as_ref().is_some_and(|g| !g.is_valid()) {
        v.push("growth constants must be positive and finite".into());
    }
    if coeffs.lipschitz.as_ref().is_some_and(|g| !g.is_valid()) {
        v.push("Lipschitz constants must be positive and finite".into());
    }

    let before = v.len();
    spec.initial.violations(d, &mut v);
    if v.len() == before && spec.z.len() == d && spec.p == 2.0 {
        let m = spec.initial.moments(&spec.z, spec.p);
        let mean_sq: f64 = m.mean.iter().map(|x| x * x).sum();
        if m.p_moment < mean_sq * (1.0 - 1e-12) {
            v.push(format!("Jensen violated: M_0 = {} < |m_0|^2 = {mean_sq}", m.p_moment));
        }
    }

    if !spec.partition.thresholds.is_finite() && !coeffs.is_strong_drift() {
        w.push("strong drift <x - z, b> > 0 is not declared; lifetime results assume it".into());
    }
    if let InitialLaw::Dirac { point } = &spec.initial {
        if point == &spec.z {
            w.push("x_0 = z almost surely".into());
        }
    }
    ValidationReport { violations: v, warnings: w }
}

impl EquationSpec {
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Returns the spec unchanged if it has no violations.
    pub fn validated(self) -> Result<Self> {
        let report = validate(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::Invalid(report))
        }
    }

    pub fn family(&self) -> CoefficientFamily {
        self.coefficients.family()
    }

    pub fn initial_moments(&self) -> InitialMoments {
        self.initial.moments(&self.z, self.p)
    }

    pub fn regime_of(&self, alpha: f64) -> Result<usize> {
        self.partition.regime_of(alpha)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::unsupported(format!("cannot serialize spec: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }
}
