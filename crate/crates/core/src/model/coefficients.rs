use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::oscillation::dyadic;

/// Coefficient classes, ordered from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientFamily {
    Constant,
    TimeOnly,
    LinearState,
    General,
}

impl CoefficientFamily {
    /// Coefficients depend on time at most.
    pub fn is_time_only(self) -> bool {
        self <= CoefficientFamily::TimeOnly
    }
}

/// Law information handed to coefficients: g(t) and its p-th root.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentSummary {
    pub g: f64,
    pub norm: f64,
}

impl MomentSummary {
    pub fn new(g: f64, p: f64) -> Self {
        Self { g, norm: g.powf(1.0 / p) }
    }
}

/// `f(t, x, summary, out)` writes a d x d matrix (row-major) into `out`.
pub type DiffusionFn = Arc<dyn Fn(f64, &[f64], MomentSummary, &mut [f64]) + Send + Sync>;
/// `f(t, x, summary, out)` writes a d-vector into `out`.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], MomentSummary, &mut [f64]) + Send + Sync>;

/// Closure-backed coefficient. Not serializable.
#[derive(Clone)]
pub struct Custom<F> {
    pub family: CoefficientFamily,
    pub f: F,
}

impl<F> fmt::Debug for Custom<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom").field("family", &self.family).finish_non_exhaustive()
    }
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];
/// Panel width for quadrature of closure-backed time-only coefficients.
pub const QUADRATURE_PANEL: f64 = 1e-3;

fn gauss_legendre(t0: f64, t1: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    if t1 <= t0 {
        return 0.0;
    }
    let panels = ((t1 - t0) / QUADRATURE_PANEL).ceil().max(1.0) as usize;
    let h = (t1 - t0) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = t0 + i as f64 * h;
        let mid = a + 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Per-regime diffusion coefficient sigma_i(t, x, g).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusion {
    /// sigma = value * I
    Scalar { value: f64 },
    /// Constant d x d matrix.
    Matrix { rows: Vec<Vec<f64>> },
    /// sigma(t) = values[j] * I on [breaks[j-1], breaks[j]), right-continuous.
    PiecewiseScalar { breaks: Vec<f64>, values: Vec<f64> },
    /// sigma(t) = amplitude * I on the dyadic on-intervals (a_n + D_n, a_n + 3 D_n], else 0.
    DyadicSchedule { amplitude: f64 },
    /// sigma(x) = scale * diag(x - z)
    Linear { scale: f64 },
    #[serde(skip)]
    Custom(Custom<DiffusionFn>),
}

impl Diffusion {
    pub fn zero() -> Self {
        Diffusion::Scalar { value: 0.0 }
    }

    pub fn scalar(value: f64) -> Self {
        Diffusion::Scalar { value }
    }

    pub fn family(&self) -> CoefficientFamily {
        match self {
            Diffusion::Scalar { .. } | Diffusion::Matrix { .. } => CoefficientFamily::Constant,
            Diffusion::PiecewiseScalar { .. } | Diffusion::DyadicSchedule { .. } => CoefficientFamily::TimeOnly,
            Diffusion::Linear { .. } => CoefficientFamily::LinearState,
            Diffusion::Custom(c) => c.family,
        }
    }

    /// Scalar multiple of the identity at time t, if the coefficient has that form.
    fn scalar_at(&self, t: f64) -> Option<f64> {
        match self {
            Diffusion::Scalar { value } => Some(*value),
            Diffusion::PiecewiseScalar { breaks, values } => Some(values[breaks.partition_point(|&b| b <= t)]),
            Diffusion::DyadicSchedule { amplitude } => Some(if dyadic::is_on(t) { *amplitude } else { 0.0 }),
            _ => None,
        }
    }

    /// out += sigma(t, x, g) dw. `scratch` must hold d * d values for closures.
    #[allow(clippy::too_many_arguments)]
    pub fn apply(
        &self,
        t: f64,
        x: &[f64],
        z: &[f64],
        summary: MomentSummary,
        dw: &[f64],
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        if let Some(c) = self.scalar_at(t) {
            if c != 0.0 {
                for (o, w) in out.iter_mut().zip(dw) {
                    *o += c * w;
                }
            }
            return;
        }
        match self {
            Diffusion::Matrix { rows } => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o += row.iter().zip(dw).map(|(m, w)| m * w).sum::<f64>();
                }
            }
            Diffusion::Linear { scale } => {
                for ((o, w), (xi, zi)) in out.iter_mut().zip(dw).zip(x.iter().zip(z)) {
                    *o += scale * (xi - zi) * w;
                }
            }
            Diffusion::Custom(c) => {
                let d = x.len();
                let m = &mut scratch[..d * d];
                (c.f)(t, x, summary, m);
                for (i, o) in out.iter_mut().enumerate() {
                    *o += m[i * d..(i + 1) * d].iter().zip(dw).map(|(a, w)| a * w).sum::<f64>();
                }
            }
            _ => unreachable!(),
        }
    }

    /// Squared Frobenius norm of a state-free coefficient at time t.
    pub fn frobenius_sq(&self, t: f64, d: usize) -> f64 {
        if let Some(c) = self.scalar_at(t) {
            return c * c * d as f64;
        }
        match self {
            Diffusion::Matrix { rows } => rows.iter().flatten().map(|v| v * v).sum(),
            Diffusion::Linear { .. } => 0.0,
            Diffusion::Custom(c) => {
                let z = vec![0.0; d];
                let mut m = vec![0.0; d * d];
                (c.f)(t, &z, MomentSummary::default(), &mut m);
                m.iter().map(|v| v * v).sum()
            }
            _ => unreachable!(),
        }
    }

    /// Right limit of `frobenius_sq` at t.
    pub fn frobenius_sq_right(&self, t: f64, d: usize) -> f64 {
        match self {
            Diffusion::DyadicSchedule { amplitude } => {
                if dyadic::is_on_right(t) {
                    amplitude * amplitude * d as f64
                } else {
                    0.0
                }
            }
            _ => self.frobenius_sq(t, d),
        }
    }

    /// Integral of the squared Frobenius norm over [t0, t1]; exact for the built-in forms.
    pub fn frobenius_sq_integral(&self, t0: f64, t1: f64, d: usize) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let df = d as f64;
        match self {
            Diffusion::Scalar { value } => value * value * df * (t1 - t0),
            Diffusion::Matrix { .. } => self.frobenius_sq(t0, d) * (t1 - t0),
            Diffusion::PiecewiseScalar { breaks, values } => {
                let mut total = 0.0;
                let mut left = t0;
                let mut j = breaks.partition_point(|&b| b <= t0);
                while left < t1 {
                    let right = breaks.get(j).copied().unwrap_or(f64::INFINITY).min(t1);
                    total += values[j] * values[j] * (right - left);
                    left = right;
                    j += 1;
                }
                total * df
            }
            Diffusion::DyadicSchedule { amplitude } => {
                amplitude * amplitude * df * (dyadic::on_measure_below(t1) - dyadic::on_measure_below(t0))
            }
            Diffusion::Linear { .. } => 0.0,
            Diffusion::Custom(_) => gauss_legendre(t0, t1, |t| self.frobenius_sq(t, d)),
        }
    }

    /// Coefficient c with E||sigma(X)||_F^2 = c * E||X - z||^2 for state-linear diffusions.
    pub fn linear_gain(&self) -> f64 {
        match self {
            Diffusion::Linear { scale } => scale * scale,
            _ => 0.0,
        }
    }

    /// First discontinuity strictly after t, for piecewise-defined forms.
    pub fn next_break(&self, t: f64) -> Option<f64> {
        match self {
            Diffusion::PiecewiseScalar { breaks, .. } => breaks.iter().copied().find(|&b| b > t),
            Diffusion::DyadicSchedule { .. } => dyadic::next_break(t),
            _ => None,
        }
    }
}

/// Drift b(t, x, g).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    Constant { value: Vec<f64> },
    /// b(x) = rate * (x - z)
    Linear { rate: f64 },
    /// b(t) = direction * 1{t < 1 - cutoff} / (2 sqrt(1 - t))
    InverseSqrtRamp { cutoff: f64, direction: Vec<f64> },
    #[serde(skip)]
    Custom(Custom<DriftFn>),
}

impl Drift {
    pub fn family(&self) -> CoefficientFamily {
        match self {
            Drift::Zero | Drift::Constant { .. } => CoefficientFamily::Constant,
            Drift::InverseSqrtRamp { .. } => CoefficientFamily::TimeOnly,
            Drift::Linear { .. } => CoefficientFamily::LinearState,
            Drift::Custom(c) => c.family,
        }
    }

    fn ramp(t: f64, cutoff: f64) -> f64 {
        if t < 1.0 - cutoff {
            0.5 / (1.0 - t).sqrt()
        } else {
            0.0
        }
    }

    /// Writes b(t, x, g) into `out`.
    pub fn eval(&self, t: f64, x: &[f64], z: &[f64], summary: MomentSummary, out: &mut [f64]) {
        match self {
            Drift::Zero => out.fill(0.0),
            Drift::Constant { value } => out.copy_from_slice(value),
            Drift::Linear { rate } => {
                for ((o, xi), zi) in out.iter_mut().zip(x).zip(z) {
                    *o = rate * (xi - zi);
                }
            }
            Drift::InverseSqrtRamp { cutoff, direction } => {
                let r = Self::ramp(t, *cutoff);
                for (o, u) in out.iter_mut().zip(direction) {
                    *o = u * r;
                }
            }
            Drift::Custom(c) => (c.f)(t, x, summary, out),
        }
    }

    /// State-free part b(t) of a drift of the form rate * (x - z) + b(t).
    pub fn time_part(&self, t: f64, d: usize, out: &mut [f64]) {
        match self {
            Drift::Linear { .. } | Drift::Zero => out.fill(0.0),
            _ => {
                let z = vec![0.0; d];
                self.eval(t, &z, &z, MomentSummary::default(), out)
            }
        }
    }

    /// Right limit of `time_part` at t.
    pub fn time_part_right(&self, t: f64, d: usize, out: &mut [f64]) {
        match self {
            Drift::InverseSqrtRamp { cutoff, .. } if t >= 1.0 - cutoff => out.fill(0.0),
            _ => self.time_part(t, d, out),
        }
    }

    /// Integral of the state-free part over [t0, t1]; exact for the built-in forms.
    pub fn time_part_integral(&self, t0: f64, t1: f64, d: usize, out: &mut [f64]) {
        out.fill(0.0);
        if t1 <= t0 {
            return;
        }
        match self {
            Drift::Zero | Drift::Linear { .. } => {}
            Drift::Constant { value } => {
                for (o, v) in out.iter_mut().zip(value) {
                    *o = v * (t1 - t0);
                }
            }
            Drift::InverseSqrtRamp { cutoff, direction } => {
                let end = 1.0 - cutoff;
                let (a, b) = (t0.min(end), t1.min(end));
                let mass = (1.0 - a).sqrt() - (1.0 - b).sqrt();
                for (o, u) in out.iter_mut().zip(direction) {
                    *o = u * mass;
                }
            }
            Drift::Custom(_) => {
                let mut buf = vec![0.0; d];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = gauss_legendre(t0, t1, |t| {
                        self.time_part(t, d, &mut buf);
                        buf[i]
                    });
                }
            }
        }
    }

    /// Rate c if the drift is c * (x - z) + b(t), `None` for other forms.
    pub fn linear_rate(&self) -> Option<f64> {
        match self {
            Drift::Linear { rate } => Some(*rate),
            Drift::Custom(c) if !c.family.is_time_only() => None,
            _ => Some(0.0),
        }
    }

    pub fn next_break(&self, t: f64) -> Option<f64> {
        match self {
            Drift::InverseSqrtRamp { cutoff, .. } if t < 1.0 - cutoff => Some(1.0 - cutoff),
            _ => None,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Drift::Constant { value } => Some(value.len()),
            Drift::InverseSqrtRamp { direction, .. } => Some(direction.len()),
            _ => None,
        }
    }
}

/// Diffusion coefficients indexed by regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionFamily {
    PerRegime { regimes: Vec<Diffusion> },
    /// sigma_n = scale * n^exponent * I, one per regime n = 1, 2, ...
    PowerLaw { scale: f64, exponent: f64 },
}

impl DiffusionFamily {
    pub fn per_regime(regimes: Vec<Diffusion>) -> Self {
        DiffusionFamily::PerRegime { regimes }
    }

    /// Diffusion of regime `i` (1-based).
    pub fn regime(&self, i: usize) -> Cow<'_, Diffusion> {
        match self {
            DiffusionFamily::PerRegime { regimes } => Cow::Borrowed(&regimes[i - 1]),
            DiffusionFamily::PowerLaw { scale, exponent } => {
                Cow::Owned(Diffusion::Scalar { value: scale * (i as f64).powf(*exponent) })
            }
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            DiffusionFamily::PerRegime { regimes } => Some(regimes.len()),
            DiffusionFamily::PowerLaw { .. } => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn family(&self) -> CoefficientFamily {
        match self {
            DiffusionFamily::PerRegime { regimes } => {
                regimes.iter().map(Diffusion::family).max().unwrap_or(CoefficientFamily::Constant)
            }
            DiffusionFamily::PowerLaw { .. } => CoefficientFamily::Constant,
        }
    }
}

/// Declared per-regime growth or Lipschitz constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeBound {
    PerRegime { values: Vec<f64> },
    /// K_n = scale * n^exponent
    PowerLaw { scale: f64, exponent: f64 },
}

impl RegimeBound {
    pub fn at(&self, n: usize) -> Option<f64> {
        match self {
            RegimeBound::PerRegime { values } => values.get(n - 1).copied(),
            RegimeBound::PowerLaw { scale, exponent } => Some(scale * (n as f64).powf(*exponent)),
        }
    }

    fn all_positive(&self) -> bool {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match self {
            RegimeBound::PerRegime { values } => values.iter().all(|&v| ok(v)),
            RegimeBound::PowerLaw { scale, exponent } => ok(*scale) && exponent.is_finite(),
        }
    }
}

/// Constants (K_b, K_sigma_i) or (L_b, L_sigma_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub drift: f64,
    pub diffusion: RegimeBound,
}

impl Constants {
    pub(crate) fn is_valid(&self) -> bool {
        self.drift > 0.0 && self.drift.is_finite() && self.diffusion.all_positive()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeCoefficients {
    pub drift: Drift,
    pub diffusion: DiffusionFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<Constants>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<Constants>,
    /// Declares <x - z, b> > 0 for x != z when it cannot be read off the drift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong_drift: Option<bool>,
}

impl RegimeCoefficients {
    pub fn new(drift: Drift, diffusion: DiffusionFamily) -> Self {
        Self { drift, diffusion, growth: None, lipschitz: None, strong_drift: None }
    }

    pub fn with_growth(mut self, growth: Constants) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn family(&self) -> CoefficientFamily {
        self.drift.family().max(self.diffusion.family())
    }

    pub fn is_strong_drift(&self) -> bool {
        match (&self.drift, self.strong_drift) {
            (_, Some(declared)) => declared,
            (Drift::Linear { rate }, None) => *rate > 0.0,
            _ => false,
        }
    }
}
