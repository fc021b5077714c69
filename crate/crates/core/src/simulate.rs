//! Euler-Maruyama particle system with mean-field coupling through the
//! empirical p-th moment.

use rayon::prelude::*;

use crate::curve::{Crossing, MomentCurve, Provenance};
use crate::error::{BlowUp, Error, Result};
use crate::model::{Diffusion, EquationSpec, MomentSummary, ThresholdPartition};
use crate::reduce::par_pairwise_sum;
use crate::rng::{CounterRng, Domain};

/// Particles handled per parallel work item.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Record every k-th step (the final time is always recorded).
    pub record_every: usize,
    pub seed: u64,
    /// Pair particles 2j and 2j + 1 with opposite Brownian increments.
    pub antithetic: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(n: usize, dt: f64, horizon: f64, seed: u64) -> Self {
        Self { n, dt, horizon, record_every: 1, seed, antithetic: false, threads: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("particle count must be at least 1"));
        }
        if self.n > u32::MAX as usize {
            return Err(Error::domain("particle count exceeds the RNG counter range"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be nonnegative, got {}", self.horizon)));
        }
        if self.record_every == 0 {
            return Err(Error::domain("record_every must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::domain("thread count must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps to reach the horizon; the last one may be shorter than dt.
    pub fn steps(&self) -> u64 {
        let ratio = self.horizon / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as u64
        } else {
            ratio.ceil() as u64
        }
    }

    fn time_of(&self, k: u64) -> f64 {
        if k >= self.steps() {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// Length of step k + 1: dt, except for a shortened final step.
    fn step_length(&self, k: u64) -> f64 {
        let ratio = self.horizon / self.dt;
        let exact = (ratio - ratio.round()).abs() <= 1e-9 * ratio.round().max(1.0);
        if exact || k + 1 < self.steps() {
            self.dt
        } else {
            self.horizon - self.time_of(k)
        }
    }
}

/// N particles in R^d stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub dim: usize,
    pub t: f64,
    pub seed: u64,
    pub step_index: u64,
    pub antithetic: bool,
}

impl ParticleEnsemble {
    /// Draws N independent copies of x_0 at t = 0.
    pub fn initialize(spec: &EquationSpec, n: usize, seed: u64) -> Self {
        let d = spec.dim;
        let rng = CounterRng::new(seed, Domain::InitialLaw);
        let mut positions = vec![0.0; n * d];
        for (j, x) in positions.chunks_mut(d).enumerate() {
            spec.initial.sample(&rng, j as u32, x);
        }
        Self { positions, dim: d, t: 0.0, seed, step_index: 0, antithetic: false }
    }

    pub fn from_positions(positions: Vec<f64>, dim: usize, t: f64, seed: u64) -> Result<Self> {
        if dim == 0 || positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::domain("positions must hold a positive multiple of dim values"));
        }
        Ok(Self { positions, dim, t, seed, step_index: 0, antithetic: false })
    }

    pub fn n(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn particle(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }
}

fn distance_power(x: &[f64], z: &[f64], p: f64) -> f64 {
    let sq: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    if p == 2.0 {
        sq
    } else {
        sq.powf(0.5 * p)
    }
}

/// ||X^j - z||^p for every particle.
pub fn moment_samples(ensemble: &ParticleEnsemble, z: &[f64], p: f64) -> Vec<f64> {
    let d = ensemble.dim;
    let mut out = vec![0.0; ensemble.n()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, vals)| {
        let base = c * CHUNK;
        for (i, v) in vals.iter_mut().enumerate() {
            *v = distance_power(ensemble.particle(base + i), z, p);
        }
    });
    debug_assert_eq!(d, z.len());
    out
}

/// Empirical p-th moment, reduced in a fixed order.
pub fn empirical_moment(ensemble: &ParticleEnsemble, z: &[f64], p: f64) -> f64 {
    par_pairwise_sum(&moment_samples(ensemble, z, p)) / ensemble.n() as f64
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = par_pairwise_sum(samples) / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = par_pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample mean of ||X^j - z||^p and its standard error.
pub fn estimate_moment(ensemble: &ParticleEnsemble, z: &[f64], p: f64) -> Result<(f64, f64)> {
    if ensemble.n() < 2 {
        return Err(Error::domain("standard error needs at least 2 particles"));
    }
    Ok(mean_and_stderr(&moment_samples(ensemble, z, p)))
}

/// One Euler-Maruyama step. The regime is selected from the pre-step
/// empirical moment.
pub fn step(ensemble: &mut ParticleEnsemble, spec: &EquationSpec, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::domain("dt must be positive"));
    }
    let g = empirical_moment(ensemble, &spec.z, spec.p);
    advance(ensemble, spec, dt, g)
}

fn advance(ensemble: &mut ParticleEnsemble, spec: &EquationSpec, dt: f64, g: f64) -> Result<()> {
    let regime = spec.partition.regime_of(g)?;
    let sigma: Diffusion = spec.coefficients.diffusion.regime(regime).into_owned();
    let drift = &spec.coefficients.drift;
    let summary = MomentSummary::new(g, spec.p);
    let (d, t, k, z) = (ensemble.dim, ensemble.t, ensemble.step_index, &spec.z);
    let rng = CounterRng::new(ensemble.seed, Domain::Increments);
    let sqrt_dt = dt.sqrt();
    let antithetic = ensemble.antithetic;

    let bad = ensemble
        .positions
        .par_chunks_mut(CHUNK * d)
        .enumerate()
        .map_init(
            || (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d * d]),
            |(dw, bx, inc, scratch), (c, block)| {
                let mut first_bad = None;
                for (i, x) in block.chunks_mut(d).enumerate() {
                    let j = c * CHUNK + i;
                    let (stream, sign) = if antithetic { (j & !1, if j & 1 == 1 { -1.0 } else { 1.0 }) } else { (j, 1.0) };
                    rng.normals(k, stream as u32, dw);
                    for w in dw.iter_mut() {
                        *w *= sign * sqrt_dt;
                    }
                    drift.eval(t, x, z, summary, bx);
                    inc.fill(0.0);
                    sigma.apply(t, x, z, summary, dw, inc, scratch);
                    for ((xi, s), b) in x.iter_mut().zip(inc.iter()).zip(bx.iter()) {
                        *xi += s + b * dt;
                    }
                    if first_bad.is_none() && x.iter().any(|v| !v.is_finite()) {
                        first_bad = Some(j);
                    }
                }
                first_bad
            },
        )
        .flatten()
        .min();

    if let Some(particle) = bad {
        return Err(Error::BlowUp(Box::new(BlowUp {
            step: k,
            time: t,
            particle,
            partial: MomentCurve::new(Provenance::Empirical),
        })));
    }
    ensemble.t = t + dt;
    ensemble.step_index = k + 1;
    Ok(())
}

/// Crossings between two consecutive moment estimates, located by linear
/// interpolation.
pub(crate) fn interpolate_crossings(
    partition: &ThresholdPartition,
    (t0, g0): (f64, f64),
    (t1, g1): (f64, f64),
    out: &mut Vec<Crossing>,
) {
    let at = |level: f64| if g1 == g0 { t1 } else { (t0 + (level - g0) / (g1 - g0) * (t1 - t0)).clamp(t0, t1) };
    let upward = g1 > g0;
    let start = out.len();
    let (c0, c1) = (partition.cell_of(g0), partition.cell_of(g1));
    let thresholds: Vec<usize> = if c1 > c0 { (c0..c1).collect() } else { (c1..c0).collect() };
    for k in thresholds {
        let level = partition.threshold(k);
        out.push(Crossing { time: at(level), threshold: k, level, upward });
    }
    // point cells are passed through without a regime change
    let (lo, hi) = (g0.min(g1), g0.max(g1));
    for (j, &level) in partition.atoms.iter().enumerate() {
        if level == g1 || (level > lo && level < hi) {
            out.push(Crossing { time: at(level), threshold: partition.atom_label(j), level, upward });
        }
    }
    out[start..].sort_by(|a, b| a.time.total_cmp(&b.time));
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::domain(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Simulates from x_0 at t = 0 up to the horizon.
pub fn run(spec: &EquationSpec, cfg: &SimConfig) -> Result<(MomentCurve, ParticleEnsemble)> {
    run_until(spec, cfg, |_| false)
}

/// As [`run`], stopping early once `stop` returns true for the curve so far.
/// `stop` sees every step, including unrecorded ones, through the crossings.
pub fn run_until(
    spec: &EquationSpec,
    cfg: &SimConfig,
    stop: impl FnMut(&MomentCurve) -> bool + Send,
) -> Result<(MomentCurve, ParticleEnsemble)> {
    let report = spec.validate();
    if !report.is_valid() {
        return Err(Error::Invalid(report));
    }
    cfg.validate()?;
    let mut ensemble = ParticleEnsemble::initialize(spec, cfg.n, cfg.seed);
    ensemble.antithetic = cfg.antithetic;
    let curve = with_pool(cfg.threads, || simulate_loop(spec, cfg, &mut ensemble, stop))??;
    Ok((curve, ensemble))
}

/// Continues an existing ensemble for `cfg.horizon` more time units.
pub fn continue_run(spec: &EquationSpec, cfg: &SimConfig, ensemble: &mut ParticleEnsemble) -> Result<MomentCurve> {
    cfg.validate()?;
    with_pool(cfg.threads, || simulate_loop(spec, cfg, ensemble, |_| false))?
}

fn simulate_loop(
    spec: &EquationSpec,
    cfg: &SimConfig,
    ensemble: &mut ParticleEnsemble,
    mut stop: impl FnMut(&MomentCurve) -> bool,
) -> Result<MomentCurve> {
    let mut curve = MomentCurve::new(Provenance::Empirical);
    let steps = cfg.steps();
    let t_start = ensemble.t;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let t = t_start + cfg.time_of(k);
        ensemble.t = t;
        let samples = moment_samples(ensemble, &spec.z, spec.p);
        let (g, se) = mean_and_stderr(&samples);
        if !g.is_finite() {
            // positions are finite but the moment overflowed
            let particle = samples.iter().position(|v| !v.is_finite()).unwrap_or(0);
            let step = ensemble.step_index;
            return Err(Error::BlowUp(Box::new(BlowUp { step, time: t, particle, partial: curve })));
        }
        let regime = spec.partition.regime_of(g)?;
        if let Some(p) = prev {
            interpolate_crossings(&spec.partition, p, (t, g), &mut curve.crossings);
        }
        prev = Some((t, g));
        let halt = k == steps || stop(&curve);
        if k % cfg.record_every as u64 == 0 || halt {
            curve.push(t, g, if cfg.n >= 2 { se } else { 0.0 }, regime);
        }
        if halt {
            break;
        }
        let dt = cfg.step_length(k);
        if let Err(e) = advance(ensemble, spec, dt, g) {
            return Err(match e {
                Error::BlowUp(mut b) => {
                    if curve.last_time() != Some(t) {
                        curve.push(t, g, se, regime);
                    }
                    b.partial = curve;
                    Error::BlowUp(b)
                }
                other => other,
            });
        }
    }
    Ok(curve)
}
