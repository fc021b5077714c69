//! Moment-equation analysis for p = 2 and time-only coefficients.
//!
//! With state-free coefficients the moment function satisfies
//!
//! ```text
//! g(t) = A(t) + sum_i integral_T0^t 1{g(s) in A_i} ||sigma_i(s)||_F^2 ds,
//! A(t) = E||x_0 - z + integral_T0^t b(s) ds||^2,
//! ```
//!
//! so on any stretch where the regime is constant g moves exactly like the
//! regime function g_i(t) = A(t) + integral ||sigma_i||^2.

use std::fmt;

use crate::curve::{Crossing, MomentCurve, Provenance};
use crate::error::{Error, Result};
use crate::model::{BoundarySide, Diffusion, Drift, EquationSpec, ThresholdPartition};

/// Slope tolerance for closed-form coefficients.
pub const EXACT_TOLERANCE: f64 = 1e-12;
/// Tolerance for comparing solved increments with regime-function increments.
pub const INCREMENT_TOLERANCE: f64 = 1e-9;

/// A(t) = M_0 + 2 <m_0, I_b(t)> + ||I_b(t)||^2 with I_b(t) the drift integral from T_0.
#[derive(Debug, Clone)]
pub struct DriftAccumulator {
    drift: Drift,
    dim: usize,
    t0: f64,
    mean: Vec<f64>,
    second_moment: f64,
}

impl DriftAccumulator {
    pub fn new(drift: Drift, t0: f64, mean: Vec<f64>, second_moment: f64) -> Self {
        Self { dim: mean.len(), drift, t0, mean, second_moment }
    }

    pub fn from_spec(spec: &EquationSpec, t0: f64) -> Self {
        let m = spec.initial_moments();
        Self::new(spec.coefficients.drift.clone(), t0, m.mean, m.p_moment)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// I_b(t)
    pub fn integral(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift.time_part_integral(self.t0, t, self.dim, &mut out);
        out
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.integral(t);
        let cross: f64 = self.mean.iter().zip(&i).map(|(m, v)| m * v).sum();
        let sq: f64 = i.iter().map(|v| v * v).sum();
        self.second_moment + 2.0 * cross + sq
    }

    /// A'(t+) = 2 <m_0 + I_b(t), b(t+)>
    pub fn slope_right(&self, t: f64) -> f64 {
        let i = self.integral(t);
        let mut b = vec![0.0; self.dim];
        self.drift.time_part_right(t, self.dim, &mut b);
        2.0 * self.mean.iter().zip(&i).zip(&b).map(|((m, v), w)| (m + v) * w).sum::<f64>()
    }

    fn next_break(&self, t: f64) -> Option<f64> {
        self.drift.next_break(t)
    }
}

/// The regime functions g_i on [T_0, inf), 1-based.
pub trait RegimeMomentFunctions {
    fn t0(&self) -> f64;
    fn value(&self, regime: usize, t: f64) -> f64;
    /// Right derivative of g_i at t.
    fn slope_right(&self, regime: usize, t: f64) -> f64;
    /// Whether values and slopes are closed-form.
    fn exact(&self) -> bool;
    /// Next coefficient discontinuity after t.
    fn next_break(&self, _t: f64) -> Option<f64> {
        None
    }
}

/// Regime functions built from a validated spec.
#[derive(Debug, Clone)]
pub struct SpecMomentFunctions {
    pub accumulator: DriftAccumulator,
    spec: EquationSpec,
    exact: bool,
}

fn is_builtin_diffusion(s: &Diffusion) -> bool {
    !matches!(s, Diffusion::Custom(_))
}

impl SpecMomentFunctions {
    fn diffusion(&self, regime: usize) -> std::borrow::Cow<'_, Diffusion> {
        self.spec.coefficients.diffusion.regime(regime)
    }

    pub fn spec(&self) -> &EquationSpec {
        &self.spec
    }
}

impl RegimeMomentFunctions for SpecMomentFunctions {
    fn t0(&self) -> f64 {
        self.accumulator.t0
    }

    fn value(&self, regime: usize, t: f64) -> f64 {
        self.accumulator.value(t) + self.diffusion(regime).frobenius_sq_integral(self.t0(), t, self.spec.dim)
    }

    fn slope_right(&self, regime: usize, t: f64) -> f64 {
        self.accumulator.slope_right(t) + self.diffusion(regime).frobenius_sq_right(t, self.spec.dim)
    }

    fn exact(&self) -> bool {
        self.exact
    }

    fn next_break(&self, t: f64) -> Option<f64> {
        let mut best = self.accumulator.next_break(t);
        if let crate::model::DiffusionFamily::PerRegime { regimes } = &self.spec.coefficients.diffusion {
            for s in regimes {
                if let Some(b) = s.next_break(t) {
                    best = Some(best.map_or(b, |x: f64| x.min(b)));
                }
            }
        }
        best
    }
}

/// Regime functions given directly as closures; slopes by one-sided differences.
pub struct ClosureMomentFunctions {
    pub t0: f64,
    pub functions: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub h: f64,
}

impl ClosureMomentFunctions {
    pub fn new(t0: f64, functions: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>) -> Self {
        Self { t0, functions, h: 1e-7 }
    }

    pub fn pair(t0: f64, g1: impl Fn(f64) -> f64 + Send + Sync + 'static, g2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(t0, vec![Box::new(g1), Box::new(g2)])
    }
}

impl RegimeMomentFunctions for ClosureMomentFunctions {
    fn t0(&self) -> f64 {
        self.t0
    }

    fn value(&self, regime: usize, t: f64) -> f64 {
        (self.functions[regime - 1])(t)
    }

    fn slope_right(&self, regime: usize, t: f64) -> f64 {
        let f = &self.functions[regime - 1];
        // second-order forward difference
        (-3.0 * f(t) + 4.0 * f(t + self.h) - f(t + 2.0 * self.h)) / (2.0 * self.h)
    }

    fn exact(&self) -> bool {
        false
    }
}

/// Checks the spec can be analyzed and builds its regime functions at T_0.
pub fn regime_moment_functions(spec: &EquationSpec, t0: f64) -> Result<SpecMomentFunctions> {
    let report = spec.validate();
    if !report.is_valid() {
        return Err(Error::Invalid(report));
    }
    if spec.p != 2.0 {
        return Err(Error::unsupported(format!("moment analysis needs p = 2, got p = {}", spec.p)));
    }
    if !spec.family().is_time_only() {
        return Err(Error::unsupported(format!(
            "moment analysis needs time-only coefficients, got {:?}",
            spec.family()
        )));
    }
    if !t0.is_finite() {
        return Err(Error::domain("T0 must be finite"));
    }
    let exact = !matches!(spec.coefficients.drift, Drift::Custom(_))
        && match &spec.coefficients.diffusion {
            crate::model::DiffusionFamily::PerRegime { regimes } => regimes.iter().all(is_builtin_diffusion),
            _ => true,
        };
    Ok(SpecMomentFunctions { accumulator: DriftAccumulator::from_spec(spec, t0), spec: spec.clone(), exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonexistenceCase {
    /// Threshold in the upper regime: g_1 non-decreasing, g_2 strictly decreasing.
    A,
    /// Threshold in the lower regime: g_1 strictly increasing, g_2 non-increasing.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerdictKind {
    SolvedTo(f64),
    NoSolutionAt { t: f64, case: NonexistenceCase },
    Inconclusive { t: Option<f64> },
}

/// Data the verdict rests on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evidence {
    /// Threshold label at the decisive hit.
    pub threshold: Option<usize>,
    /// Right slopes (lower regime, upper regime) at the hit.
    pub slopes: Option<(f64, f64)>,
    /// Window on which monotonicity was checked.
    pub window: Option<(f64, f64)>,
    pub tolerance: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceVerdict {
    pub kind: VerdictKind,
    pub evidence: Evidence,
}

impl ExistenceVerdict {
    pub fn is_no_solution(&self) -> bool {
        matches!(self.kind, VerdictKind::NoSolutionAt { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            VerdictKind::SolvedTo(_) => "SOLVED_TO",
            VerdictKind::NoSolutionAt { .. } => "NO_SOLUTION",
            VerdictKind::Inconclusive { .. } => "INCONCLUSIVE",
        }
    }
}

/// `verdict=<kind> t=<time> case=<A|B|->`
impl fmt::Display for ExistenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.kind_name();
        match self.kind {
            VerdictKind::SolvedTo(t) => write!(f, "verdict={name} t={t} case=-"),
            VerdictKind::NoSolutionAt { t, case } => write!(f, "verdict={name} t={t} case={case:?}"),
            VerdictKind::Inconclusive { t: Some(t) } => write!(f, "verdict={name} t={t} case=-"),
            VerdictKind::Inconclusive { t: None } => write!(f, "verdict={name} t=- case=-"),
        }
    }
}

pub(crate) enum Decision {
    Continue(usize),
    Stop(VerdictKind),
}

/// Decision at g(t) = y_k between lower regime `lo` and upper regime `lo + 1`,
/// from right slopes only.
pub(crate) fn decide(side: BoundarySide, lo: usize, s_lo: f64, s_up: f64, tol: f64, t: f64) -> Decision {
    let up = lo + 1;
    match side {
        BoundarySide::Upper => {
            if s_up > tol {
                Decision::Continue(up)
            } else if s_up < -tol {
                if s_lo < -tol {
                    Decision::Continue(lo)
                } else {
                    Decision::Stop(VerdictKind::NoSolutionAt { t, case: NonexistenceCase::A })
                }
            } else {
                Decision::Stop(VerdictKind::Inconclusive { t: Some(t) })
            }
        }
        BoundarySide::Lower => {
            if s_lo < -tol {
                Decision::Continue(lo)
            } else if s_lo > tol {
                if s_up > tol {
                    Decision::Continue(up)
                } else {
                    Decision::Stop(VerdictKind::NoSolutionAt { t, case: NonexistenceCase::B })
                }
            } else {
                Decision::Stop(VerdictKind::Inconclusive { t: Some(t) })
            }
        }
    }
}

/// Forward solve with event detection from T_0 to the horizon.
///
/// Between events g is advanced in closed form as g(r) + g_k(t) - g_k(r); steps
/// of size `dt` are cut at coefficient breaks, and level hits are located by
/// bisection. At every hit the decision table on the right slopes decides how
/// to continue.
pub fn solve_moment_equation(
    spec: &EquationSpec,
    t0: f64,
    horizon: f64,
    dt: f64,
) -> Result<(MomentCurve, ExistenceVerdict)> {
    let gmf = regime_moment_functions(spec, t0)?;
    solve_with(&gmf, &spec.partition, horizon, dt)
}

/// As [`solve_moment_equation`] for any regime functions.
pub fn solve_with(
    gmf: &impl RegimeMomentFunctions,
    partition: &ThresholdPartition,
    horizon: f64,
    dt: f64,
) -> Result<(MomentCurve, ExistenceVerdict)> {
    let t0 = gmf.t0();
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= t0) || !horizon.is_finite() {
        return Err(Error::domain(format!("horizon {horizon} lies before T0 = {t0}")));
    }
    let tol = if gmf.exact() { EXACT_TOLERANCE } else { 10.0 * dt };
    let mut curve = MomentCurve::new(Provenance::Analytic);
    let mut evidence = Evidence { tolerance: tol, ..Evidence::default() };

    let mut t = t0;
    let mut g = gmf.value(1, t0);
    // an upward hit from inside cell k lands on threshold k
    let mut on_threshold = on_threshold(partition, g);

    loop {
        let regime = match on_threshold {
            Some(k) => {
                let (s_lo, s_up) = (gmf.slope_right(k, t), gmf.slope_right(k + 1, t));
                evidence.threshold = Some(k);
                evidence.slopes = Some((s_lo, s_up));
                match decide(partition.side(k), k, s_lo, s_up, tol, t) {
                    Decision::Continue(r) => r,
                    Decision::Stop(kind) => {
                        curve.push(t, g, 0.0, partition.cell_of(g));
                        evidence.note = format!("both regimes reject continuation at threshold {k}");
                        return Ok((curve, ExistenceVerdict { kind, evidence }));
                    }
                }
            }
            None => partition.cell_of(g),
        };
        curve.push(t, g, 0.0, regime);
        if t >= horizon {
            break;
        }
        match advance_window(gmf, partition, regime, t, g, horizon, dt, &mut curve)? {
            WindowEnd::Horizon => break,
            WindowEnd::Hit { time, threshold } => {
                t = time;
                g = partition.threshold(threshold);
                curve.crossings.push(Crossing { time, threshold, level: g, upward: threshold == regime });
                on_threshold = Some(threshold);
                if curve.last_time() == Some(t) {
                    // re-hit at the window start: no progress possible
                    evidence.threshold = Some(threshold);
                    evidence.note = "threshold re-hit without leaving it".into();
                    return Ok((curve, ExistenceVerdict { kind: VerdictKind::Inconclusive { t: Some(t) }, evidence }));
                }
            }
        }
    }
    evidence.note = "solved up to the horizon".into();
    let end = curve.last_time().unwrap_or(t0);
    Ok((curve, ExistenceVerdict { kind: VerdictKind::SolvedTo(end), evidence }))
}

fn on_threshold(partition: &ThresholdPartition, g: f64) -> Option<usize> {
    let k = partition.thresholds.count_below(g) + 1;
    (partition.threshold(k) == g).then_some(k)
}

enum WindowEnd {
    Horizon,
    Hit { time: f64, threshold: usize },
}

/// Advances in a fixed regime until the horizon or a threshold hit, pushing
/// grid points. A hit is pushed by the caller.
#[allow(clippy::too_many_arguments)]
fn advance_window(
    gmf: &impl RegimeMomentFunctions,
    partition: &ThresholdPartition,
    regime: usize,
    r: f64,
    g_r: f64,
    horizon: f64,
    dt: f64,
    curve: &mut MomentCurve,
) -> Result<WindowEnd> {
    let base = gmf.value(regime, r);
    let g_at = |t: f64| g_r + (gmf.value(regime, t) - base);
    let lo = if regime >= 2 { Some(regime - 1) } else { None };
    let hi = regime;
    let (y_lo, y_hi) = (lo.map_or(f64::NEG_INFINITY, |k| partition.threshold(k)), partition.threshold(hi));
    let mut t_a = r;
    let mut g_a = g_r;
    let mut steps: u64 = 0;
    loop {
        let grid = (r + (steps + 1) as f64 * dt).min(horizon);
        let t_b = gmf.next_break(t_a).map_or(grid, |b| b.min(grid));
        let g_b = g_at(t_b);
        if !g_b.is_finite() {
            return Err(Error::domain(format!("moment function is not finite at t = {t_b}")));
        }
        // crossing the upper threshold
        if g_b >= y_hi {
            let time = bisect(&g_at, t_a, t_b, y_hi, true);
            pass_atoms(partition, (t_a, g_a), (time, y_hi), &g_at, curve);
            return Ok(WindowEnd::Hit { time, threshold: hi });
        }
        if g_b <= y_lo && t_b > r {
            let time = bisect(&g_at, t_a, t_b, y_lo, false);
            if time > r || g_a != y_lo {
                pass_atoms(partition, (t_a, g_a), (time, y_lo), &g_at, curve);
                return Ok(WindowEnd::Hit { time, threshold: lo.unwrap() });
            }
        }
        pass_atoms(partition, (t_a, g_a), (t_b, g_b), &g_at, curve);
        if t_b >= grid {
            steps += 1;
        }
        curve.push(t_b, g_b, 0.0, regime);
        if t_b >= horizon {
            return Ok(WindowEnd::Horizon);
        }
        t_a = t_b;
        g_a = g_b;
    }
}

/// First time in (a, b] at which g reaches `level`, g(a) on the near side.
fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, level: f64, upward: bool) -> f64 {
    let reached = |v: f64| if upward { v >= level } else { v <= level };
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if reached(g(m)) {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

/// Records a pass through any point cell strictly between the two states.
fn pass_atoms(
    partition: &ThresholdPartition,
    (t_a, g_a): (f64, f64),
    (t_b, g_b): (f64, f64),
    g_at: &impl Fn(f64) -> f64,
    curve: &mut MomentCurve,
) {
    for (j, &c) in partition.atoms.iter().enumerate() {
        let upward = g_b > g_a;
        let inside = if upward { c > g_a && c <= g_b } else { c < g_a && c >= g_b };
        if inside {
            let time = bisect(g_at, t_a, t_b, c, upward);
            curve.crossings.push(Crossing { time, threshold: partition.atom_label(j), level: c, upward });
        }
    }
}

/// Searches [T_0, T_0 + eps], then successively halved windows, for the
/// monotonicity pattern that rules out any solution started at the threshold.
///
/// `boundary` says which regime owns the threshold: `Upper` for A_1 = [0, y),
/// `Lower` for A_1 = [0, y].
pub fn check_nonexistence(
    gmf: &impl RegimeMomentFunctions,
    t0: f64,
    eps: f64,
    boundary: BoundarySide,
) -> Result<ExistenceVerdict> {
    check_nonexistence_with(gmf, t0, eps, boundary, if gmf.exact() { EXACT_TOLERANCE } else { 1e-9 })
}

pub fn check_nonexistence_with(
    gmf: &impl RegimeMomentFunctions,
    t0: f64,
    eps: f64,
    boundary: BoundarySide,
    tol: f64,
) -> Result<ExistenceVerdict> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("window eps must be positive, got {eps}")));
    }
    const SAMPLES: usize = 256;
    const HALVINGS: usize = 30;
    let slopes = (gmf.slope_right(1, t0), gmf.slope_right(2, t0));
    let mut evidence = Evidence { threshold: Some(1), slopes: Some(slopes), tolerance: tol, ..Evidence::default() };

    let diffs = |i: usize, w: f64| -> Vec<f64> {
        let h = w / SAMPLES as f64;
        (0..SAMPLES).map(|j| gmf.value(i, t0 + (j + 1) as f64 * h) - gmf.value(i, t0 + j as f64 * h)).collect()
    };
    let mut w = eps;
    for _ in 0..=HALVINGS {
        let (d1, d2) = (diffs(1, w), diffs(2, w));
        let hit = match boundary {
            // g_1 non-decreasing, g_2 strictly decreasing
            BoundarySide::Upper => {
                (d1.iter().all(|&d| d >= -tol) && d2.iter().all(|&d| d < -tol)).then_some(NonexistenceCase::A)
            }
            // g_1 strictly increasing, g_2 non-increasing
            BoundarySide::Lower => {
                (d1.iter().all(|&d| d > tol) && d2.iter().all(|&d| d <= tol)).then_some(NonexistenceCase::B)
            }
        };
        if let Some(case) = hit {
            evidence.window = Some((t0, t0 + w));
            evidence.note = "monotonicity pattern holds on the window".into();
            return Ok(ExistenceVerdict { kind: VerdictKind::NoSolutionAt { t: t0, case }, evidence });
        }
        w *= 0.5;
    }
    evidence.note = "no window shows the required strict monotonicity".into();
    Ok(ExistenceVerdict { kind: VerdictKind::Inconclusive { t: Some(t0) }, evidence })
}

/// Checks g(t) - g(r) = g_k(t) - g_k(r) at every curve point in (r, s].
pub fn lemma32_check(curve: &MomentCurve, gmf: &impl RegimeMomentFunctions, r: f64, s: f64) -> Result<bool> {
    if !(r < s) {
        return Err(Error::domain("window needs r < s"));
    }
    let idx: Vec<usize> = (0..curve.len()).filter(|&i| curve.times[i] >= r && curve.times[i] <= s).collect();
    let in_force: Vec<usize> = idx.iter().copied().filter(|&i| curve.times[i] < s).map(|i| curve.regime_trace[i]).collect();
    let first = curve.times.partition_point(|&t| t < r);
    // regime in force on (r, s] is the one recorded at or before r
    let k = match (first, curve.times.get(first)) {
        (_, Some(&t)) if t == r => curve.regime_trace[first],
        (f, _) if f > 0 => curve.regime_trace[f - 1],
        _ => return Err(Error::precondition("window starts before the curve")),
    };
    if in_force.iter().any(|&q| q != k) {
        return Err(Error::precondition(format!("regime is not constant on ({r}, {s}]")));
    }
    let g_r = curve.g_at(r).ok_or_else(|| Error::precondition("window starts outside the curve"))?;
    let base = gmf.value(k, r);
    Ok(idx.iter().filter(|&&i| curve.times[i] > r).all(|&i| {
        let lhs = curve.g_values[i] - g_r;
        let rhs = gmf.value(k, curve.times[i]) - base;
        (lhs - rhs).abs() <= INCREMENT_TOLERANCE * (1.0 + curve.g_values[i].abs())
    }))
}

/// Runs [`lemma32_check`] on every maximal regime-constant window, each
/// extended to the point where the next regime takes over.
pub fn verify_windows(curve: &MomentCurve, gmf: &impl RegimeMomentFunctions) -> Result<Vec<(f64, f64, bool)>> {
    let mut out = Vec::new();
    for (first, last, _) in curve.regime_windows() {
        let r = curve.times[first];
        let s = curve.times.get(last + 1).copied().unwrap_or(curve.times[last]);
        if s > r {
            out.push((r, s, lemma32_check(curve, gmf, r, s)?));
        }
    }
    Ok(out)
}

/// Moment functions of the non-unique solutions of the single-regime
/// equation with an idle point cell at 1 + a:
///
/// ```text
/// g_w(t) = 1 + t          t < a
///          1 + a          a <= t < a + w
///          1 + t - w      t >= a + w
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonUniqueFamily {
    pub a: f64,
}

impl NonUniqueFamily {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::domain(format!("a must be positive, got {a}")));
        }
        Ok(Self { a })
    }

    pub fn g(&self, w: f64, t: f64) -> f64 {
        let a = self.a;
        if t < a {
            1.0 + t
        } else if t < a + w {
            1.0 + a
        } else {
            1.0 + (t - w)
        }
    }

    /// g_w(t) - (1 + |{s < t : g_w(s) != 1 + a}|), zero when g_w solves the
    /// moment equation with sigma_1 = 1 off the point cell and 0 on it.
    pub fn residual(&self, w: f64, t: f64) -> f64 {
        let idle = (t.min(self.a + w) - self.a).max(0.0);
        let active = t.max(0.0) - idle;
        self.g(w, t) - (1.0 + active)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionFamily, InitialLaw, RegimeCoefficients};

    fn two_regime(x0: InitialLaw, b: f64, s1: f64, s2: f64) -> EquationSpec {
        EquationSpec {
            name: None,
            p: 2.0,
            dim: 1,
            z: vec![0.0],
            partition: ThresholdPartition::two_regime(1.0),
            coefficients: RegimeCoefficients::new(
                if b == 0.0 { Drift::Zero } else { Drift::Constant { value: vec![b] } },
                DiffusionFamily::per_regime(vec![Diffusion::scalar(s1), Diffusion::scalar(s2)]),
            ),
            initial: x0,
        }
    }

    fn ex37() -> EquationSpec {
        two_regime(InitialLaw::dirac(vec![1.0]), -1.0, 2f64.sqrt(), 0.0)
    }

    #[test]
    fn frozen_dynamics_solve_to_horizon() {
        let s = two_regime(InitialLaw::dirac(vec![0.5]), 0.0, 0.0, 0.0);
        let (c, v) = solve_moment_equation(&s, 0.0, 2.0, 0.1).unwrap();
        assert_eq!(v.kind, VerdictKind::SolvedTo(2.0));
        assert!(c.g_values.iter().all(|&g| g == 0.25));
    }

    #[test]
    fn example_37_has_no_solution() {
        for t0 in [0.0, 0.1, 0.3, 2.0] {
            let (c, v) = solve_moment_equation(&ex37(), t0, t0 + 1.0, 1e-3).unwrap();
            assert_eq!(v.kind, VerdictKind::NoSolutionAt { t: t0, case: NonexistenceCase::A }, "T0 = {t0}");
            let (s1, s2) = v.evidence.slopes.unwrap();
            assert!(s1.abs() < 1e-15 && s2 == -2.0);
            assert_eq!(c.len(), 1);
        }
        assert_eq!(
            solve_moment_equation(&ex37(), 0.0, 1.0, 1e-3).unwrap().1.to_string(),
            "verdict=NO_SOLUTION t=0 case=A"
        );
    }

    #[test]
    fn regime_functions_of_example_37() {
        let gmf = regime_moment_functions(&ex37(), 0.0).unwrap();
        for t in [0.0, 0.3, 1.7] {
            assert!((gmf.value(1, t) - (1.0 + t * t)).abs() < 1e-15);
            assert!((gmf.value(2, t) - (1.0 - t) * (1.0 - t)).abs() < 1e-15);
        }
    }

    #[test]
    fn example_38_continues_past_first_hit() {
        let s0 = 2f64.sqrt() - 1.0;
        let s = two_regime(InitialLaw::dirac(vec![0.0]), -1.0, 2f64.sqrt(), 0.0);
        let (c, v) = solve_moment_equation(&s, 0.0, 2.0, 1e-3).unwrap();
        assert_eq!(v.kind, VerdictKind::SolvedTo(2.0));
        assert_eq!(c.crossings.len(), 1);
        assert!((c.crossings[0].time - s0).abs() < 1e-14);
        let (_, s_up) = v.evidence.slopes.unwrap();
        assert!((s_up - 2.0 * s0).abs() < 1e-12);
        // after S_0, g = 1 + (t^2 - S_0^2)
        for (t, g) in c.times.iter().zip(&c.g_values).filter(|(t, _)| **t > s0) {
            assert!((g - (1.0 + t * t - s0 * s0)).abs() < 1e-12);
        }
        assert!(c.invariant_violations().is_empty());
        let gmf = regime_moment_functions(&s, 0.0).unwrap();
        assert!(verify_windows(&c, &gmf).unwrap().iter().all(|w| w.2));
    }

    #[test]
    fn restarted_example_38_regime_two_function() {
        let s0 = 2f64.sqrt() - 1.0;
        let law = InitialLaw::Gaussian { mean: vec![1.0 - 2f64.sqrt()], variance: vec![2.0 * s0] };
        let s = two_regime(law, -1.0, 2f64.sqrt(), 0.0);
        let gmf = regime_moment_functions(&s, s0).unwrap();
        for t in [s0, 0.6, 1.0, 3.0] {
            assert!((gmf.value(2, t) - ((1.0 - s0 * s0) + t * t)).abs() < 1e-12, "t = {t}");
        }
        let (_, v) = solve_moment_equation(&s, s0, 2.0, 1e-3).unwrap();
        assert_eq!(v.kind, VerdictKind::SolvedTo(2.0));
    }

    #[test]
    fn driftless_unit_diffusion() {
        let s = two_regime(InitialLaw::dirac(vec![0.5]), 0.0, 1.0, 1.0);
        let gmf = regime_moment_functions(&s, 0.0).unwrap();
        assert_eq!(gmf.value(1, 0.4), 0.25 + 0.4);
    }

    #[test]
    fn closure_check_examples() {
        let gmf = ClosureMomentFunctions::pair(0.0, |t| 1.0 + t * t, |t| (1.0 - t) * (1.0 - t));
        let v = check_nonexistence(&gmf, 0.0, 0.5, BoundarySide::Upper).unwrap();
        assert_eq!(v.kind, VerdictKind::NoSolutionAt { t: 0.0, case: NonexistenceCase::A });

        let s0 = 2f64.sqrt() - 1.0;
        let inc = ClosureMomentFunctions::pair(s0, move |t| 1.0 + t * t, move |t| (1.0 - s0 * s0) + t * t);
        let v = check_nonexistence(&inc, s0, 0.5, BoundarySide::Upper).unwrap();
        assert!(matches!(v.kind, VerdictKind::Inconclusive { .. }));

        let flat = ClosureMomentFunctions::pair(0.0, |_| 1.0, |_| 1.0);
        for side in [BoundarySide::Upper, BoundarySide::Lower] {
            let v = check_nonexistence(&flat, 0.0, 0.5, side).unwrap();
            assert!(matches!(v.kind, VerdictKind::Inconclusive { .. }));
        }
        assert!(check_nonexistence(&flat, 0.0, 0.0, BoundarySide::Upper).is_err());
    }

    #[test]
    fn case_b_mirror() {
        // A_1 = [0, 1]: g_1 increasing, g_2 decreasing
        let mut s = two_regime(InitialLaw::dirac(vec![1.0]), 0.0, 1.0, 0.0);
        s.coefficients.drift = Drift::Zero;
        s.partition = ThresholdPartition::two_regime(1.0).with_lower_boundary(1);
        let (_, v) = solve_moment_equation(&s, 0.0, 1.0, 1e-2).unwrap();
        // g_2 is flat, so only the slope of g_1 is strict
        assert_eq!(v.kind, VerdictKind::NoSolutionAt { t: 0.0, case: NonexistenceCase::B });
        let gmf = ClosureMomentFunctions::pair(0.0, |t| 1.0 + t, |t| 1.0 - t);
        let v = check_nonexistence(&gmf, 0.0, 0.5, BoundarySide::Lower).unwrap();
        assert_eq!(v.kind, VerdictKind::NoSolutionAt { t: 0.0, case: NonexistenceCase::B });
    }

    #[test]
    fn unsupported_specs_are_refused() {
        let mut s = ex37();
        s.p = 3.0;
        assert!(matches!(solve_moment_equation(&s, 0.0, 1.0, 0.1), Err(Error::Unsupported(_))));
        let mut s = ex37();
        s.coefficients.drift = Drift::Linear { rate: 1.0 };
        assert!(matches!(solve_moment_equation(&s, 0.0, 1.0, 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn lemma32_on_pre_crossing_window() {
        // start above the level: regime 2 until g = (1.5 - t)^2 reaches 1 at t = 0.5
        let s = two_regime(InitialLaw::dirac(vec![1.5]), -1.0, 2f64.sqrt(), 0.0);
        let (c, v) = solve_moment_equation(&s, 0.0, 2.0, 1e-3).unwrap();
        assert_eq!(v.kind, VerdictKind::NoSolutionAt { t: 0.5, case: NonexistenceCase::A });
        let gmf = regime_moment_functions(&s, 0.0).unwrap();
        assert!(lemma32_check(&c, &gmf, 0.0, 0.5).unwrap());
        // the last point carries the hit
        let mut straddle = c.clone();
        straddle.push(0.75, 0.9, 0.0, 1);
        straddle.push(1.0, 0.8, 0.0, 1);
        assert!(matches!(lemma32_check(&straddle, &gmf, 0.0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn non_unique_family_values() {
        let fam = NonUniqueFamily::new(0.5).unwrap();
        assert_eq!(fam.g(0.25, 0.25), 1.25);
        assert_eq!(fam.g(0.25, 0.6), 1.5);
        assert_eq!(fam.g(0.25, 1.0), 1.75);
        for w in [0.0, 0.1, 0.25, 2.0] {
            for i in 0..=40 {
                assert!(fam.residual(w, i as f64 * 0.1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn point_cell_is_passed_through() {
        let mut s = two_regime(InitialLaw::dirac(vec![1.0]), 0.0, 1.0, 0.0);
        s.partition = ThresholdPartition::new(crate::model::ThresholdRule::Explicit { values: vec![] }).with_atom(2.0);
        let (c, v) = solve_moment_equation(&s, 0.0, 1.5, 1e-2).unwrap();
        assert_eq!(v.kind, VerdictKind::SolvedTo(1.5));
        assert!((c.g_at(1.5).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(c.crossings.len(), 1);
        assert!((c.crossings[0].time - 1.0).abs() < 1e-12);
    }
}
