//! Dyadic oscillating-diffusion counterexample.
//!
//! With a_n = 2^-n and D_n = 2^-(n+2) the diffusion is switched on exactly on
//! the intervals (a_n + D_n, a_n + 3 D_n]. Started from g(s) = 1 at a time
//! s < 1/2, the moment equation
//!
//! ```text
//! g_s(t) = 1 - (t - s) + 2 * integral_s^t 1{g_s(u) < 1} 1{u is on} du
//! ```
//!
//! runs into a point where neither regime can continue, at a time m(s) that
//! goes to 0 with s.

use crate::curve::{Crossing, MomentCurve, Provenance};
use crate::error::{Error, Result};
use crate::model::{
    Diffusion, DiffusionFamily, Drift, EquationSpec, InitialLaw, RegimeCoefficients, ThresholdPartition,
};

/// Exact dyadic bookkeeping for the on/off schedule.
pub mod dyadic {
    /// 2^-n, exact for every n representable as a (possibly subnormal) double.
    pub fn pow2_neg(n: usize) -> f64 {
        if n <= 1022 {
            f64::from_bits(((1023 - n) as u64) << 52)
        } else {
            pow2_neg(1022) * pow2_neg(n - 1022)
        }
    }

    pub fn a(n: usize) -> f64 {
        pow2_neg(n)
    }

    pub fn delta(n: usize) -> f64 {
        pow2_neg(n + 2)
    }

    /// Smallest k with t >= 2^-k, for t in (0, 1).
    pub(crate) fn band(t: f64) -> usize {
        debug_assert!(t > 0.0 && t < 1.0);
        let biased = ((t.to_bits() >> 52) & 0x7ff) as usize;
        if biased > 0 {
            1023 - biased
        } else {
            let mut k = 1022;
            while t < pow2_neg(k) {
                k += 1;
            }
            k
        }
    }

    /// t * 2^(k+2) for the band k of t; on-intervals map to (5, 7].
    fn scaled(t: f64) -> Option<f64> {
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let k = band(t);
        Some(t / delta(k))
    }

    /// t lies in some (a_n + D_n, a_n + 3 D_n].
    pub fn is_on(t: f64) -> bool {
        scaled(t).is_some_and(|x| x > 5.0 && x <= 7.0)
    }

    /// The schedule is on immediately to the right of t.
    pub fn is_on_right(t: f64) -> bool {
        scaled(t).is_some_and(|x| (5.0..7.0).contains(&x))
    }

    /// Lebesgue measure of the on-set inside (0, t].
    pub fn on_measure_below(t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 0.5;
        }
        let k = band(t);
        // all bands n > k lie entirely below t and contribute sum 2 D_n = 2^-(k+1)
        let full = pow2_neg(k + 1);
        full + (t - (a(k) + delta(k))).clamp(0.0, 2.0 * delta(k))
    }

    /// First switching time strictly after t. Undefined at t <= 0, where the
    /// switching times accumulate.
    pub fn next_break(t: f64) -> Option<f64> {
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let k = band(t);
        let mut candidates = vec![a(k) + delta(k), a(k) + 3.0 * delta(k)];
        if k >= 2 {
            candidates.push(a(k - 1) + delta(k - 1));
        }
        candidates.into_iter().filter(|&c| c > t).reduce(f64::min)
    }
}

use dyadic::{a, delta};

/// kappa(s) = inf{k >= 0 : s >= a_k}.
pub fn kappa(s: f64) -> Result<usize> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("kappa needs s in (0, 1), got {s}")));
    }
    Ok(dyadic::band(s))
}

/// Parameters of the oscillating example. The drift only matters through its
/// -1 contribution to the slope of g, which holds on [0, 1 - alpha).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationSchedule {
    pub alpha: f64,
    pub amplitude: f64,
}

impl Default for OscillationSchedule {
    fn default() -> Self {
        Self { alpha: 0.25, amplitude: std::f64::consts::SQRT_2 }
    }
}

/// Output of [`OscillationSchedule::solve_delayed_equation`].
#[derive(Debug, Clone)]
pub struct DelayedSolution {
    pub curve: MomentCurve,
    /// First time at which neither regime can continue, if one occurs before t = 1.
    pub m_numeric: Option<f64>,
    pub kappa: usize,
    /// kappa(s) > 1, so the case formula applies.
    pub in_case_formula_scope: bool,
    /// The solve stayed inside [0, 1 - alpha) where the drift has the assumed form.
    pub within_drift_support: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseRow {
    pub s: f64,
    pub kappa: usize,
    pub m_formula: f64,
    pub m_numeric: f64,
    pub bound: f64,
    pub dt: f64,
}

impl CollapseRow {
    pub fn numeric_matches(&self) -> bool {
        (self.m_numeric - self.m_formula).abs() <= 2.0 * self.dt
    }

    pub fn within_bound(&self) -> bool {
        self.m_formula <= self.bound && self.m_numeric <= self.bound
    }
}

#[derive(Debug, Clone)]
pub struct CollapseReport {
    pub rows: Vec<CollapseRow>,
    /// (k, max m(s) over sampled s in band k), k increasing.
    pub band_maxima: Vec<(usize, f64)>,
    /// band_maxima[i + 1] / band_maxima[i]
    pub decay_ratios: Vec<f64>,
}

impl CollapseReport {
    pub fn numeric_ok(&self) -> bool {
        self.rows.iter().all(CollapseRow::numeric_matches)
    }

    pub fn bound_ok(&self) -> bool {
        self.rows.iter().all(CollapseRow::within_bound)
    }

    pub fn max_ratio(&self) -> f64 {
        self.decay_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn decreasing(&self) -> bool {
        self.decay_ratios.iter().all(|&r| r < 1.0)
    }

    pub fn passed(&self) -> bool {
        self.numeric_ok() && self.bound_ok() && self.decreasing()
    }

    pub fn to_csv(&self) -> String {
        use crate::curve::fmt_f64;
        let mut out = String::from("s,kappa,m_formula,m_numeric,bound\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(r.s),
                r.kappa,
                fmt_f64(r.m_formula),
                fmt_f64(r.m_numeric),
                fmt_f64(r.bound)
            ));
        }
        out
    }
}

/// Default step for a start point in band k.
pub fn default_dt(k: usize) -> f64 {
    delta(k.max(1)) / 64.0
}

impl OscillationSchedule {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self { alpha, ..Self::default() })
    }

    /// The n-th on-interval (a_n + D_n, a_n + 3 D_n].
    pub fn on_interval(n: usize) -> (f64, f64) {
        (a(n) + delta(n), a(n) + 3.0 * delta(n))
    }

    pub fn sigma1_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("sigma_1 is defined for t > 0, got {t}")));
        }
        Ok(if dyadic::is_on(t) { self.amplitude } else { 0.0 })
    }

    /// |b(t)| = 1{t < 1 - alpha} / (2 sqrt(1 - t)).
    pub fn drift_magnitude(&self, t: f64) -> f64 {
        if t < 1.0 - self.alpha {
            0.5 / (1.0 - t).sqrt()
        } else {
            0.0
        }
    }

    pub fn drift_bound(&self) -> f64 {
        0.5 / self.alpha.sqrt()
    }

    /// Checks disjointness and band containment of the first `depth` on-intervals.
    pub fn interval_violations(depth: usize) -> Vec<String> {
        let mut v = Vec::new();
        for n in 1..=depth {
            let (lo, hi) = Self::on_interval(n);
            if !(lo > a(n) && hi < a(n - 1)) {
                v.push(format!("on-interval {n} leaves (a_n, a_(n-1))"));
            }
            if n > 1 {
                let (_, prev_hi) = Self::on_interval(n);
                let (next_lo, _) = Self::on_interval(n - 1);
                if prev_hi >= next_lo {
                    v.push(format!("on-intervals {n} and {} overlap", n - 1));
                }
            }
        }
        v
    }

    /// The full SDE: x_0 = 1, z = 0, A_1 = [0, 1), sigma_1 on the schedule,
    /// sigma_2 = 0 and drift -1{t < 1 - alpha} / (2 sqrt(1 - t)).
    pub fn to_spec(&self) -> EquationSpec {
        EquationSpec {
            name: Some("oscillation-3.10".into()),
            p: 2.0,
            dim: 1,
            z: vec![0.0],
            partition: ThresholdPartition::two_regime(1.0),
            coefficients: RegimeCoefficients::new(
                Drift::InverseSqrtRamp { cutoff: self.alpha, direction: vec![-1.0] },
                DiffusionFamily::per_regime(vec![
                    Diffusion::DyadicSchedule { amplitude: self.amplitude },
                    Diffusion::zero(),
                ]),
            ),
            initial: InitialLaw::dirac(vec![1.0]),
        }
    }

    /// Closed-form m(s) for kappa(s) > 1.
    pub fn m_of_s_caseformula(&self, s: f64) -> Result<f64> {
        let k = kappa(s)?;
        if k <= 1 {
            return Err(Error::precondition(format!("case formula needs kappa(s) > 1, got kappa({s}) = {k}")));
        }
        let m = if s < a(k) + delta(k) {
            2.0 * (a(k) + delta(k)) - s
        } else if s < a(k) + 3.0 * delta(k) {
            s
        } else {
            2.0 * (a(k - 1) + delta(k - 1)) - s
        };
        Ok(m)
    }

    /// Slope of g_s in `regime` just to the right of t: the drift contributes -1,
    /// the diffusion +2 while on and only in regime 1.
    fn slope_right(&self, regime: usize, t: f64) -> f64 {
        let diffusion = if regime == 1 && dyadic::is_on_right(t) { 0.5 * self.amplitude * self.amplitude } else { 0.0 };
        -1.0 + 2.0 * diffusion
    }

    /// Event-detecting forward solve of the delayed moment equation from g(s) = 1.
    ///
    /// Steps of size `dt` are cut at schedule switching times and at level hits;
    /// at every hit of g = 1 the one-sided slopes of both regimes decide whether
    /// the solution continues.
    pub fn solve_delayed_equation(&self, s: f64, dt: f64) -> Result<DelayedSolution> {
        let k = kappa(s)?;
        if !(dt > 0.0) {
            return Err(Error::domain("dt must be positive"));
        }
        let limit = delta(k.max(1)) / 4.0;
        if dt > limit {
            return Err(Error::domain(format!("dt = {dt} too coarse for kappa(s) = {k}; use dt <= {limit}")));
        }
        const LEVEL: f64 = 1.0;
        let horizon = 1.0;
        let mut curve = MomentCurve::new(Provenance::Analytic);
        let mut t = s;
        let mut g = LEVEL;
        let mut steps: u64 = 0;
        let mut m_numeric = None;
        let mut regime;

        loop {
            // g sits on the level: A_1 = [0, 1) so the level belongs to regime 2.
            if g == LEVEL {
                let (s1, s2) = (self.slope_right(1, t), self.slope_right(2, t));
                if s2 > 0.0 {
                    regime = 2;
                } else if s1 < 0.0 {
                    regime = 1;
                } else {
                    // g_1 non-decreasing, g_2 strictly decreasing: no continuation
                    curve.push(t, g, 0.0, 2);
                    m_numeric = Some(t);
                    break;
                }
            } else {
                regime = if g < LEVEL { 1 } else { 2 };
            }
            curve.push(t, g, 0.0, regime);
            if t >= horizon {
                break;
            }
            let grid_next = (s + (steps + 1) as f64 * dt).min(horizon);
            let piece_end = dyadic::next_break(t).map_or(grid_next, |b| b.min(grid_next));
            let slope = self.slope_right(regime, t);
            let gap = g - LEVEL;
            let hit_time = if gap != 0.0 && gap * slope < 0.0 { Some(t + gap.abs() / slope.abs()) } else { None };
            match hit_time {
                Some(th) if th <= piece_end => {
                    if th >= grid_next {
                        steps += 1;
                    }
                    let upward = gap < 0.0;
                    t = th;
                    g = LEVEL;
                    curve.crossings.push(Crossing { time: t, threshold: 1, level: LEVEL, upward });
                }
                _ => {
                    g += slope * (piece_end - t);
                    if piece_end >= grid_next {
                        steps += 1;
                    }
                    t = piece_end;
                }
            }
        }
        let within_drift_support = curve.last_time().unwrap_or(s) < 1.0 - self.alpha;
        Ok(DelayedSolution { curve, m_numeric, kappa: k, in_case_formula_scope: k > 1, within_drift_support })
    }

    /// Case formula against the numeric solve for every s in the grid.
    /// `dt_divisor` sets dt = D_kappa(s) / dt_divisor.
    pub fn verify_collapse_bound(&self, s_grid: &[f64], dt_divisor: f64) -> Result<CollapseReport> {
        let mut rows = Vec::with_capacity(s_grid.len());
        for &s in s_grid {
            let k = kappa(s)?;
            let m_formula = self.m_of_s_caseformula(s)?;
            let dt = delta(k) / dt_divisor;
            let sol = self.solve_delayed_equation(s, dt)?;
            let m_numeric = sol.m_numeric.unwrap_or(f64::INFINITY);
            rows.push(CollapseRow { s, kappa: k, m_formula, m_numeric, bound: a(k) + 9.0 * delta(k), dt });
        }
        let mut band_maxima: Vec<(usize, f64)> = Vec::new();
        for r in &rows {
            match band_maxima.iter_mut().find(|(k, _)| *k == r.kappa) {
                Some((_, m)) => *m = m.max(r.m_formula),
                None => band_maxima.push((r.kappa, r.m_formula)),
            }
        }
        band_maxima.sort_by_key(|&(k, _)| k);
        let decay_ratios = band_maxima.windows(2).map(|w| w[1].1 / w[0].1).collect();
        Ok(CollapseReport { rows, band_maxima, decay_ratios })
    }

    /// A start point s < delta whose solution cannot be continued past a time
    /// below delta. Returns (s, m(s)).
    pub fn obstruction_below(&self, delta_t: f64) -> Result<(f64, f64)> {
        if !(delta_t > 0.0 && delta_t <= 1.0) {
            return Err(Error::domain("delta must lie in (0, 1]"));
        }
        // m(s) <= a_k + 9 D_k = 3.25 a_k <= 3.25 s
        let s = delta_t / 4.0;
        let sol = self.solve_delayed_equation(s, default_dt(kappa(s)?))?;
        let m = sol.m_numeric.ok_or_else(|| Error::precondition(format!("no obstruction found from s = {s}")))?;
        Ok((s, m))
    }
}

/// Start points a_k (1 + j / per_band), j < per_band, for each band k.
pub fn band_grid(bands: std::ops::RangeInclusive<usize>, per_band: usize) -> Vec<f64> {
    bands.flat_map(|k| (0..per_band).map(move |j| a(k) * (1.0 + j as f64 / per_band as f64))).collect()
}
