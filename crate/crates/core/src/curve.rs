use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Empirical,
    Analytic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Empirical => "empirical",
            Provenance::Analytic => "analytic",
        }
    }
}

/// g(t) reached a threshold (or point cell) level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub time: f64,
    /// 1-based threshold label; point cells are numbered after the thresholds.
    pub threshold: usize,
    pub level: f64,
    pub upward: bool,
}

/// Time-indexed moment trajectory.
///
/// `regime_trace[k]` is the regime in force from `times[k]` on, so a change
/// between k - 1 and k is explained by a crossing in `[times[k-1], times[k]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurve {
    pub times: Vec<f64>,
    pub g_values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub regime_trace: Vec<usize>,
    pub crossings: Vec<Crossing>,
    pub provenance: Provenance,
}

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl MomentCurve {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            times: Vec::new(),
            g_values: Vec::new(),
            std_errors: Vec::new(),
            regime_trace: Vec::new(),
            crossings: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, t: f64, g: f64, stderr: f64, regime: usize) {
        self.times.push(t);
        self.g_values.push(g);
        self.std_errors.push(stderr);
        self.regime_trace.push(regime);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Linear interpolation of g; `None` outside the recorded range.
    pub fn g_at(&self, t: f64) -> Option<f64> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let i = self.times.partition_point(|&s| s < t);
        if self.times[i] == t {
            return Some(self.g_values[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (g0, g1) = (self.g_values[i - 1], self.g_values[i]);
        Some(g0 + (g1 - g0) * (t - t0) / (t1 - t0))
    }

    /// Maximal runs of constant regime as `(first, last, regime)` index triples.
    pub fn regime_windows(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.regime_trace.len() {
            if k == self.regime_trace.len() || self.regime_trace[k] != self.regime_trace[start] {
                out.push((start, k - 1, self.regime_trace[start]));
                start = k;
            }
        }
        out
    }

    /// Structural invariants: increasing times, nonnegative g, crossings that
    /// explain every regime change.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            v.push("times not strictly increasing".into());
        }
        if self.g_values.iter().any(|&g| !(g >= 0.0)) {
            v.push("negative or NaN moment value".into());
        }
        for k in 1..self.len() {
            if self.regime_trace[k] != self.regime_trace[k - 1] {
                let (a, b) = (self.times[k - 1], self.times[k]);
                if !self.crossings.iter().any(|c| c.time >= a && c.time <= b) {
                    v.push(format!("regime change in [{a}, {b}] without a crossing"));
                }
            }
        }
        v
    }

    /// CSV with header `t,g,stderr,regime` (plus `provenance` when requested)
    /// and one `# crossing t=<..> k=<..>` comment per crossing at the end.
    pub fn write_csv<W: Write>(&self, mut w: W, with_provenance: bool) -> io::Result<()> {
        let mut line = String::with_capacity(96);
        w.write_all(if with_provenance { b"t,g,stderr,regime,provenance\n" } else { b"t,g,stderr,regime\n" })?;
        for k in 0..self.len() {
            line.clear();
            let _ = write!(
                line,
                "{},{},{},{}",
                fmt_f64(self.times[k]),
                fmt_f64(self.g_values[k]),
                fmt_f64(self.std_errors[k]),
                self.regime_trace[k]
            );
            if with_provenance {
                line.push(',');
                line.push_str(self.provenance.as_str());
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        for c in &self.crossings {
            writeln!(w, "# crossing t={} k={}", fmt_f64(c.time), c.threshold)?;
        }
        Ok(())
    }

    pub fn to_csv(&self, with_provenance: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, with_provenance).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
