//! Command-line front end. Data goes to `--output` (or stdout), diagnostics
//! to stderr, and analysis subcommands end stdout with one `key=value` line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::curve::MomentCurve;
use crate::error::{Error, Result};
use crate::lifetime::{classify_series, construct_lifetime, Engine, SeriesSpec, DEFAULT_N_MAX};
use crate::model::{EquationSpec, RegimeBound, ThresholdRule};
use crate::moment::{check_nonexistence, regime_moment_functions, solve_moment_equation};
use crate::oscillation::{band_grid, default_dt, OscillationSchedule};
use crate::presets;
use crate::simulate::{run, SimConfig};

pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_UNSUPPORTED: u8 = 3;
pub const EXIT_BLOW_UP: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "switchsde", version, about = "Moment-switching mean-field SDEs: simulation and analysis")]
pub struct RunConfig {
    /// Worker threads for particle simulation.
    #[arg(long, global = true, env = "SWITCHSDE_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Euler-Maruyama particle simulation; writes the moment curve as CSV.
    Simulate {
        #[command(flatten)]
        io: SpecIo,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Solves the moment equation for p = 2 with time-only coefficients.
    MomentOde {
        #[command(flatten)]
        io: SpecIo,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 2.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Constructs the crossing times T_1 < T_2 < ... and classifies the lifetime.
    Lifetime {
        #[command(flatten)]
        io: SpecIo,
        #[arg(long, value_enum, default_value_t = EngineKind::Analytic)]
        engine: EngineKind,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
        /// Integration step of the analytic engine.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Collapse of the maximal existence time m(s) for the oscillating schedule.
    Oscillation {
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// Solve a single start point instead of the band sweep.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 2)]
        first_band: usize,
        #[arg(long, default_value_t = 12)]
        last_band: usize,
        #[arg(long, default_value_t = 50)]
        per_band: usize,
        /// dt = D_kappa / dt_divisor
        #[arg(long, default_value_t = 64.0)]
        dt_divisor: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Looks for the slope pattern that rules out any solution at the threshold.
    CheckNonexistence {
        #[command(flatten)]
        io: SpecIo,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Partial sums and classification of a lifetime series.
    Series {
        #[arg(long, value_enum)]
        family: FamilyKind,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Thresholds: `k`, `k^E`, `R^k`, `(k!)^k` or a comma-separated list.
        #[arg(long, default_value = "k")]
        y: String,
        /// K_b of the growth series; K_{sigma_k} = k^alpha.
        #[arg(long, default_value_t = 1.0)]
        kb: f64,
        #[arg(long, default_value_t = 1000)]
        n_max: usize,
        #[arg(long, default_value_t = f64::INFINITY)]
        threshold: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SpecIo {
    /// Spec file (TOML) or preset name.
    pub spec: String,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(short = 'n', long = "particles", default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[arg(long)]
    pub antithetic: bool,
}

impl SimArgs {
    fn config(&self, threads: Option<usize>) -> SimConfig {
        SimConfig {
            record_every: self.record_every,
            antithetic: self.antithetic,
            threads,
            ..SimConfig::new(self.n, self.dt, self.horizon, self.seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineKind {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    #[value(alias = "example26")]
    ClosedForm,
    #[value(alias = "condition23")]
    Growth,
}

/// Preset name or path to a TOML spec, validated.
pub fn load_spec(source: &str) -> Result<EquationSpec> {
    let spec = if presets::NAMES.contains(&source) {
        presets::preset(source)?
    } else {
        let path = Path::new(source);
        if !path.exists() {
            return Err(Error::Parse(format!(
                "no spec file '{source}' and no preset of that name (presets: {})",
                presets::NAMES.join(", ")
            )));
        }
        EquationSpec::from_path(path)?
    };
    spec.validated()
}

/// Parses `k`, `k^E`, `R^k`, `(k!)^k` or `y1,y2,...`.
pub fn parse_thresholds(text: &str) -> Result<ThresholdRule> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}' in thresholds '{text}'")));
    let rule = if t == "k" {
        ThresholdRule::linear()
    } else if t == "(k!)^k" {
        ThresholdRule::FactorialPower
    } else if let Some(e) = t.strip_prefix("k^") {
        ThresholdRule::Power { scale: 1.0, exponent: num(e)? }
    } else if let Some(r) = t.strip_suffix("^k") {
        ThresholdRule::Geometric { scale: 1.0, ratio: num(r)? }
    } else {
        let values = t.split(',').map(num).collect::<Result<Vec<_>>>()?;
        ThresholdRule::Explicit { values }
    };
    Ok(rule)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Unsupported(_) => EXIT_UNSUPPORTED,
        Error::BlowUp(_) => EXIT_BLOW_UP,
        Error::Io(_) => EXIT_IO,
        Error::Domain(_) | Error::Precondition(_) | Error::Invalid(_) | Error::Parse(_) => EXIT_INVALID,
    }
}

/// Writes `data` to the file or, without one, to stdout.
fn emit(output: Option<&Path>, data: &str, out: &mut impl Write) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, data)?,
        None => out.write_all(data.as_bytes())?,
    }
    Ok(())
}

fn emit_curve(output: Option<&Path>, curve: &MomentCurve, with_provenance: bool, out: &mut impl Write) -> Result<()> {
    emit(output, &curve.to_csv(with_provenance), out)
}

fn dispatch(cfg: &RunConfig, out: &mut impl Write) -> Result<()> {
    match &cfg.command {
        Command::Simulate { io, sim } => {
            let spec = load_spec(&io.spec)?;
            match run(&spec, &sim.config(cfg.threads)) {
                Ok((curve, _)) => {
                    emit_curve(io.output.as_deref(), &curve, false, out)?;
                    let last = curve.g_values.last().copied().unwrap_or(f64::NAN);
                    writeln!(out, "g_final={last} crossings={}", curve.crossings.len())?;
                    Ok(())
                }
                Err(Error::BlowUp(b)) => {
                    emit_curve(io.output.as_deref(), &b.partial, false, out)?;
                    Err(Error::BlowUp(b))
                }
                Err(e) => Err(e),
            }
        }
        Command::MomentOde { io, t0, horizon, dt } => {
            let spec = load_spec(&io.spec)?;
            let (curve, verdict) = solve_moment_equation(&spec, *t0, *horizon, *dt)?;
            emit_curve(io.output.as_deref(), &curve, true, out)?;
            if !verdict.evidence.note.is_empty() {
                eprintln!("{}", verdict.evidence.note);
            }
            writeln!(out, "{verdict}")?;
            Ok(())
        }
        Command::Lifetime { io, engine, n_max, step, sim } => {
            let spec = load_spec(&io.spec)?;
            let engine = match engine {
                EngineKind::Analytic => Engine::Analytic { step: *step, horizon: sim.horizon },
                EngineKind::MonteCarlo => Engine::MonteCarlo(sim.config(cfg.threads)),
            };
            let report = construct_lifetime(&spec, &engine, *n_max)?;
            emit(io.output.as_deref(), &report.to_csv(), out)?;
            write!(out, "{}", report.summary())?;
            writeln!(out, "{}", report.verdict_line())?;
            Ok(())
        }
        Command::Oscillation { alpha, s, first_band, last_band, per_band, dt_divisor, output } => {
            let schedule = OscillationSchedule::new(*alpha)?;
            if let Some(s) = s {
                let sol = schedule.solve_delayed_equation(*s, default_dt(crate::oscillation::kappa(*s)?))?;
                emit_curve(output.as_deref(), &sol.curve, true, out)?;
                let formula = schedule.m_of_s_caseformula(*s).map_or("-".to_string(), |m| m.to_string());
                let numeric = sol.m_numeric.map_or("-".to_string(), |m| m.to_string());
                writeln!(out, "kappa={} m_numeric={numeric} m_formula={formula}", sol.kappa)?;
                return Ok(());
            }
            if first_band < &2 || last_band < first_band || *per_band == 0 {
                return Err(Error::domain("need 2 <= first-band <= last-band and per-band > 0"));
            }
            let report = schedule.verify_collapse_bound(&band_grid(*first_band..=*last_band, *per_band), *dt_divisor)?;
            emit(output.as_deref(), &report.to_csv(), out)?;
            for (k, m) in &report.band_maxima {
                writeln!(out, "band {k}: max m(s) = {m}")?;
            }
            writeln!(
                out,
                "verdict={} numeric_match={} bound={} max_ratio={}",
                if report.passed() { "COLLAPSE" } else { "FAIL" },
                report.numeric_ok(),
                report.bound_ok(),
                report.max_ratio()
            )?;
            Ok(())
        }
        Command::CheckNonexistence { io, t0, eps } => {
            let spec = load_spec(&io.spec)?;
            let gmf = regime_moment_functions(&spec, *t0)?;
            let verdict = check_nonexistence(&gmf, *t0, *eps, spec.partition.side(1))?;
            eprintln!("{}", verdict.evidence.note);
            writeln!(out, "{verdict}")?;
            Ok(())
        }
        Command::Series { family, alpha, y, kb, n_max, threshold, output } => {
            let thresholds = parse_thresholds(y)?;
            let series = match family {
                FamilyKind::ClosedForm => SeriesSpec::closed_form(*alpha, thresholds),
                FamilyKind::Growth => {
                    SeriesSpec::growth_bound(*kb, RegimeBound::PowerLaw { scale: 1.0, exponent: *alpha }, thresholds)
                }
            };
            let report = classify_series(&series, *n_max, *threshold)?;
            let mut csv = String::from("k,partial_sum\n");
            for (i, v) in report.partial_sums.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", i + 2, crate::curve::fmt_f64(*v)));
            }
            emit(output.as_deref(), &csv, out)?;
            writeln!(out, "evidence: {}", report.evidence)?;
            writeln!(out, "classification={}", report.classification)?;
            Ok(())
        }
    }
}

/// Runs the CLI on `args` (including the program name), writing results to `out`.
pub fn run_with<I, T>(args: I, out: &mut impl Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { 0 };
        }
    };
    match dispatch(&cfg, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    ExitCode::from(run_with(std::env::args_os(), &mut lock))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (u8, String) {
        let mut out = Vec::new();
        let code = run_with(std::iter::once("switchsde").chain(args.iter().copied()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn threshold_parsing() {
        assert_eq!(parse_thresholds("k").unwrap(), ThresholdRule::linear());
        assert_eq!(parse_thresholds("(k!)^k").unwrap(), ThresholdRule::FactorialPower);
        assert_eq!(parse_thresholds("k^2").unwrap(), ThresholdRule::Power { scale: 1.0, exponent: 2.0 });
        assert_eq!(parse_thresholds("2^k").unwrap(), ThresholdRule::Geometric { scale: 1.0, ratio: 2.0 });
        assert_eq!(parse_thresholds("1, 2.5").unwrap(), ThresholdRule::Explicit { values: vec![1.0, 2.5] });
        assert!(parse_thresholds("k^x").is_err());
    }

    #[test]
    fn verdict_line_is_last() {
        let (code, out) = run_args(&["moment-ode", "example-3.7"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().last().unwrap(), "verdict=NO_SOLUTION t=0 case=A");
        let (code, out) = run_args(&["series", "--family", "example26", "--alpha", "1", "--y", "k"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().last().unwrap(), "classification=CONVERGES");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_args(&["moment-ode", "/nonexistent/spec.toml"]).0, EXIT_INVALID);
        assert_eq!(run_args(&["moment-ode", "example-2.6"]).0, EXIT_UNSUPPORTED);
        assert_eq!(run_args(&["bogus"]).0, EXIT_INVALID);
    }
}
