//! Segmentwise construction of the solution on [T_{n-1}, T_n] and the
//! crossing-time series that decide whether T_max is finite.

mod series;

use std::borrow::Cow;
use std::fmt;

pub use series::{classify_series, Asymptotic, Classification, SeriesFamily, SeriesReport, SeriesSpec};

use crate::curve::{fmt_f64, Crossing, MomentCurve, Provenance};
use crate::error::{Error, Result};
use crate::model::{Diffusion, DiffusionFamily, Drift, EquationSpec, ThresholdRule};
use crate::moment::{decide, Decision, EXACT_TOLERANCE};
use crate::simulate::{run_until, SimConfig};

/// Default number of crossings to construct.
pub const DEFAULT_N_MAX: usize = 64;
/// Terms used when attaching series diagnostics to a report.
const SERIES_TERMS: usize = 1000;

/// Crossing times of dX = X dt + sum_n 1{g in [y_{n-1}, y_n)} n^alpha dB with
/// E|x_0|^2 = m0:
///
/// ```text
/// T_1 = log((y_1 + 1/2) / (m0 + 1/2)) / 2
/// T_n = T_{n-1} + log((y_n + n^(2 alpha) / 2) / (y_{n-1} + n^(2 alpha) / 2)) / 2
/// ```
pub fn crossing_times_example26(alpha: f64, y: &ThresholdRule, m0: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    let mut violations = Vec::new();
    crate::model::ThresholdPartition::new(y.clone()).violations(&mut violations);
    if !violations.is_empty() {
        return Err(Error::domain(violations.join("; ")));
    }
    let y1 = y.value(1);
    if !(m0 >= 0.0) || m0 >= y1 {
        return Err(Error::domain(format!("need 0 <= M0 < y_1, got M0 = {m0}, y_1 = {y1}")));
    }
    let n = y.len().map_or(n_max, |len| n_max.min(len));
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let mut t = 0.5 * ((y1 - m0) / (m0 + 0.5)).ln_1p();
    out.push(t);
    for k in 2..=n {
        t += 0.5 * series::shifted_log_ratio(y, k, 0.5 * (k as f64).powf(2.0 * alpha));
        out.push(t);
    }
    Ok(out)
}

/// Named criteria that prove T_max = infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// sum log(y_k / y_{k-1}) / (K_b + K_{sigma_k}^2) diverges.
    GrowthSeries,
    /// The closed-form crossing increments sum to infinity.
    ClosedFormSeries,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::GrowthSeries => "growth_series",
            Criterion::ClosedFormSeries => "closed_form_series",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifetimeVerdict {
    FiniteLifetimeSuspected,
    InfiniteLifetimeProvenBy(Criterion),
    Inconclusive,
}

impl fmt::Display for LifetimeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LifetimeVerdict::FiniteLifetimeSuspected => f.write_str("FINITE_LIFETIME_SUSPECTED"),
            LifetimeVerdict::InfiniteLifetimeProvenBy(c) => write!(f, "INFINITE_LIFETIME_PROVEN_BY({c})"),
            LifetimeVerdict::Inconclusive => f.write_str("INCONCLUSIVE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// n_max crossings were constructed.
    CrossingLimit,
    /// The current segment did not reach its threshold before the horizon.
    NoCrossingInHorizon,
    /// At a threshold neither regime continues.
    NoContinuation(String),
    /// The moment became non-finite.
    BlowUp { time: f64 },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::CrossingLimit => f.write_str("crossing limit reached"),
            StopReason::NoCrossingInHorizon => f.write_str("no crossing in horizon"),
            StopReason::NoContinuation(v) => write!(f, "no continuation: {v}"),
            StopReason::BlowUp { time } => write!(f, "moment blew up at t = {time}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    /// RK4 on the closed moment system with the given step, up to `horizon`.
    Analytic { step: f64, horizon: f64 },
    MonteCarlo(SimConfig),
}

impl Engine {
    pub fn analytic() -> Self {
        Engine::Analytic { step: 1e-3, horizon: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeReport {
    /// T_1 < T_2 < ...
    pub crossing_times: Vec<f64>,
    /// Index of the segment that failed to cross, if any.
    pub terminated_at: Option<usize>,
    pub stop: StopReason,
    pub growth_series: Option<SeriesReport>,
    pub closed_form_series: Option<SeriesReport>,
    pub verdict: LifetimeVerdict,
    pub curve: MomentCurve,
}

impl LifetimeReport {
    /// Partial sums of the series the verdict rests on.
    pub fn series_partial_sums(&self) -> &[f64] {
        self.closed_form_series
            .as_ref()
            .or(self.growth_series.as_ref())
            .map_or(&[], |s| s.partial_sums.as_slice())
    }

    /// `n,T_n` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,T_n\n");
        for (i, t) in self.crossing_times.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, fmt_f64(*t)));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = format!("crossings: {}\nstop: {}\n", self.crossing_times.len(), self.stop);
        if let Some(k) = self.terminated_at {
            s.push_str(&format!("terminated_at: segment {}\n", k + 1));
        }
        for (name, rep) in [("growth series", &self.growth_series), ("closed-form series", &self.closed_form_series)] {
            if let Some(r) = rep {
                s.push_str(&format!(
                    "{name}: {} ({}), partial sum {}\n",
                    r.classification,
                    r.evidence,
                    r.last_partial_sum().map_or("-".into(), |v| v.to_string())
                ));
            }
        }
        s
    }

    /// `verdict=<kind> crossings=<n> t=<last crossing>`
    pub fn verdict_line(&self) -> String {
        let t = self.crossing_times.last().map_or("-".to_string(), |t| t.to_string());
        format!("verdict={} crossings={} t={t}", self.verdict, self.crossing_times.len())
    }
}

/// alpha when the spec is dX = X dt + sum_n n^alpha dB in d = 1 around z = 0.
fn closed_form_alpha(spec: &EquationSpec) -> Option<f64> {
    let shape = spec.dim == 1
        && spec.z == [0.0]
        && spec.p == 2.0
        && !spec.partition.thresholds.is_finite()
        && spec.partition.atoms.is_empty()
        && spec.partition.boundary_to_lower.is_empty()
        && matches!(spec.coefficients.drift, Drift::Linear { rate } if rate == 1.0);
    match spec.coefficients.diffusion {
        DiffusionFamily::PowerLaw { scale, exponent } if shape && scale == 1.0 && exponent > 0.0 => Some(exponent),
        _ => None,
    }
}

/// Constructs crossing times segment by segment and attaches series diagnostics.
pub fn construct_lifetime(spec: &EquationSpec, engine: &Engine, n_max: usize) -> Result<LifetimeReport> {
    let report = spec.validate();
    if !report.is_valid() {
        return Err(Error::Invalid(report));
    }
    let run = match engine {
        Engine::Analytic { step, horizon } => AffineMoments::new(spec)?.run(*step, *horizon, n_max)?,
        Engine::MonteCarlo(cfg) => monte_carlo(spec, cfg, n_max)?,
    };

    let thresholds = &spec.partition.thresholds;
    let growth_series = match &spec.coefficients.growth {
        Some(g) if !thresholds.is_finite() => {
            let s = SeriesSpec::growth_bound(g.drift, g.diffusion.clone(), thresholds.clone());
            Some(classify_series(&s, SERIES_TERMS, f64::INFINITY)?)
        }
        _ => None,
    };
    let closed_form_series = match closed_form_alpha(spec) {
        Some(alpha) => Some(classify_series(&SeriesSpec::closed_form(alpha, thresholds.clone()), SERIES_TERMS, f64::INFINITY)?),
        None => None,
    };

    let proven = |r: &Option<SeriesReport>| {
        r.as_ref().is_some_and(|s| s.symbolic && s.classification == Classification::Diverges)
    };
    let verdict = if proven(&growth_series) {
        LifetimeVerdict::InfiniteLifetimeProvenBy(Criterion::GrowthSeries)
    } else if proven(&closed_form_series) {
        LifetimeVerdict::InfiniteLifetimeProvenBy(Criterion::ClosedFormSeries)
    } else if closed_form_series.as_ref().is_some_and(|s| s.classification == Classification::Converges)
        || matches!(run.stop, StopReason::BlowUp { .. })
    {
        LifetimeVerdict::FiniteLifetimeSuspected
    } else {
        LifetimeVerdict::Inconclusive
    };

    let terminated_at = matches!(run.stop, StopReason::NoCrossingInHorizon).then_some(run.crossing_times.len());
    Ok(LifetimeReport {
        crossing_times: run.crossing_times,
        terminated_at,
        stop: run.stop,
        growth_series,
        closed_form_series,
        verdict,
        curve: run.curve,
    })
}

struct EngineRun {
    crossing_times: Vec<f64>,
    stop: StopReason,
    curve: MomentCurve,
}

/// First upward crossing time of thresholds 1, 2, ... in order.
fn upward_crossing_times(crossings: &[Crossing], finite_count: Option<usize>) -> Vec<f64> {
    let mut out = Vec::new();
    for c in crossings {
        let in_range = finite_count.is_none_or(|n| c.threshold <= n);
        if c.upward && in_range && c.threshold == out.len() + 1 {
            out.push(c.time);
        }
    }
    out
}

fn monte_carlo(spec: &EquationSpec, cfg: &SimConfig, n_max: usize) -> Result<EngineRun> {
    let finite = spec.partition.thresholds.len();
    let result = run_until(spec, cfg, |c| upward_crossing_times(&c.crossings, finite).len() >= n_max);
    match result {
        Ok((curve, _)) => {
            let mut crossing_times = upward_crossing_times(&curve.crossings, finite);
            crossing_times.truncate(n_max);
            let stop = if crossing_times.len() >= n_max {
                StopReason::CrossingLimit
            } else {
                StopReason::NoCrossingInHorizon
            };
            Ok(EngineRun { crossing_times, stop, curve })
        }
        Err(Error::BlowUp(b)) => {
            let crossing_times = upward_crossing_times(&b.partial.crossings, finite);
            Ok(EngineRun { crossing_times, stop: StopReason::BlowUp { time: b.time }, curve: b.partial })
        }
        Err(e) => Err(e),
    }
}

/// Closed moment system for drift c (x - z) + beta(t) and diffusions that are
/// state-free or diagonal-linear in x - z:
///
/// ```text
/// m' = c m + beta(t)
/// G' = 2 c G + 2 <m, beta(t)> + ||sigma_n(t)||_F^2 + gain_n G
/// ```
struct AffineMoments<'a> {
    spec: &'a EquationSpec,
    rate: f64,
}

impl<'a> AffineMoments<'a> {
    fn new(spec: &'a EquationSpec) -> Result<Self> {
        if spec.p != 2.0 {
            return Err(Error::unsupported(format!("analytic engine needs p = 2, got p = {}", spec.p)));
        }
        let rate = spec
            .coefficients
            .drift
            .linear_rate()
            .ok_or_else(|| Error::unsupported("analytic engine needs a drift of the form c (x - z) + b(t)"))?;
        if let DiffusionFamily::PerRegime { regimes } = &spec.coefficients.diffusion {
            if let Some(i) = regimes.iter().position(|s| matches!(s, Diffusion::Custom(c) if !c.family.is_time_only())) {
                return Err(Error::unsupported(format!(
                    "analytic engine cannot close the moment system for the state-dependent diffusion of regime {}",
                    i + 1
                )));
            }
        }
        Ok(Self { spec, rate })
    }

    fn diffusion(&self, n: usize) -> Cow<'a, Diffusion> {
        self.spec.coefficients.diffusion.regime(n)
    }

    fn next_break(&self, n: usize, t: f64) -> Option<f64> {
        let a = self.spec.coefficients.drift.next_break(t);
        let b = self.diffusion(n).next_break(t);
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }

    /// Writes m' into `dm` and returns G'. `right` selects right limits at t.
    fn rhs(&self, sigma: &Diffusion, t: f64, right: bool, m: &[f64], g: f64, dm: &mut [f64]) -> f64 {
        let d = self.spec.dim;
        let drift = &self.spec.coefficients.drift;
        if right {
            drift.time_part_right(t, d, dm);
        } else {
            drift.time_part(t, d, dm);
        }
        let cross: f64 = m.iter().zip(dm.iter()).map(|(a, b)| a * b).sum();
        let sigma_sq = if right { sigma.frobenius_sq_right(t, d) } else { sigma.frobenius_sq(t, d) };
        for (o, mi) in dm.iter_mut().zip(m) {
            *o += self.rate * mi;
        }
        2.0 * self.rate * g + 2.0 * cross + sigma_sq + sigma.linear_gain() * g
    }

    /// One classical RK4 step of length h; coefficients are read as right limits
    /// at t and left limits at t + h, so breaks at the step ends are respected.
    fn rk4(&self, sigma: &Diffusion, t: f64, h: f64, m: &[f64], g: f64) -> (Vec<f64>, f64) {
        let d = m.len();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut tmp = vec![0.0; d];
        let l1 = self.rhs(sigma, t, true, m, g, &mut k1);
        for i in 0..d {
            tmp[i] = m[i] + 0.5 * h * k1[i];
        }
        let l2 = self.rhs(sigma, t + 0.5 * h, false, &tmp, g + 0.5 * h * l1, &mut k2);
        for i in 0..d {
            tmp[i] = m[i] + 0.5 * h * k2[i];
        }
        let l3 = self.rhs(sigma, t + 0.5 * h, false, &tmp, g + 0.5 * h * l2, &mut k3);
        for i in 0..d {
            tmp[i] = m[i] + h * k3[i];
        }
        let l4 = self.rhs(sigma, (t + h).next_down().max(t), false, &tmp, g + h * l3, &mut k4);
        let m1 = (0..d).map(|i| m[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        (m1, g + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4))
    }

    fn slope(&self, n: usize, t: f64, m: &[f64], g: f64) -> f64 {
        let mut dm = vec![0.0; m.len()];
        self.rhs(&self.diffusion(n), t, true, m, g, &mut dm)
    }

    fn run(&self, step: f64, horizon: f64, n_max: usize) -> Result<EngineRun> {
        if !(step > 0.0) || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain("analytic engine needs a positive step and a finite positive horizon"));
        }
        let partition = &self.spec.partition;
        let init = self.spec.initial_moments();
        let (mut m, mut g) = (init.mean, init.p_moment);
        let mut t = 0.0;
        let mut curve = MomentCurve::new(Provenance::Analytic);
        let mut crossing_times = Vec::new();

        let on_threshold = |g: f64| {
            let k = partition.thresholds.count_below(g) + 1;
            (partition.threshold(k) == g).then_some(k)
        };
        let mut pending = on_threshold(g);
        let mut regime = partition.cell_of(g);
        loop {
            if let Some(k) = pending.take() {
                let (s_lo, s_up) = (self.slope(k, t, &m, g), self.slope(k + 1, t, &m, g));
                match decide(partition.side(k), k, s_lo, s_up, EXACT_TOLERANCE * (1.0 + g), t) {
                    Decision::Continue(r) => regime = r,
                    Decision::Stop(kind) => {
                        curve.push(t, g, 0.0, partition.cell_of(g));
                        let reason = format!("{kind:?} at threshold {k} (slopes {s_lo}, {s_up})");
                        return Ok(EngineRun { crossing_times, stop: StopReason::NoContinuation(reason), curve });
                    }
                }
            }
            curve.push(t, g, 0.0, regime);
            if crossing_times.len() >= n_max {
                return Ok(EngineRun { crossing_times, stop: StopReason::CrossingLimit, curve });
            }
            if t >= horizon {
                return Ok(EngineRun { crossing_times, stop: StopReason::NoCrossingInHorizon, curve });
            }
            let sigma = self.diffusion(regime);
            let end = self.next_break(regime, t).map_or(horizon, |b| b.min(horizon));
            let h = step.min(end - t);
            let (m1, g1) = self.rk4(&sigma, t, h, &m, g);
            if !g1.is_finite() {
                return Ok(EngineRun { crossing_times, stop: StopReason::BlowUp { time: t }, curve });
            }
            let y_hi = partition.threshold(regime);
            let y_lo = if regime >= 2 { partition.threshold(regime - 1) } else { f64::NEG_INFINITY };
            let hit = if g1 >= y_hi {
                Some((regime, y_hi, true))
            } else if g1 <= y_lo && g1 < g {
                Some((regime - 1, y_lo, false))
            } else {
                None
            };
            match hit {
                Some((k, level, upward)) => {
                    let reached = |v: f64| if upward { v >= level } else { v <= level };
                    let (mut a, mut b) = (0.0, h);
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        if mid <= a || mid >= b {
                            break;
                        }
                        if reached(self.rk4(&sigma, t, mid, &m, g).1) {
                            b = mid;
                        } else {
                            a = mid;
                        }
                    }
                    m = self.rk4(&sigma, t, b, &m, g).0;
                    t += b;
                    g = level;
                    curve.crossings.push(Crossing { time: t, threshold: k, level, upward });
                    if upward && k == crossing_times.len() + 1 {
                        crossing_times.push(t);
                    }
                    pending = Some(k);
                }
                None => {
                    m = m1;
                    g = g1;
                    t = if h == end - t { end } else { t + h };
                }
            }
        }
    }
}
