//! Sampled interference patterns and their delimited-text form.

use std::fmt::Write as _;

use crate::error::{HomError, Result};

/// Seconds to femtoseconds.
pub const FS: f64 = 1e15;

pub const COLUMNS: &str = "tau_fs,R_norm,R_raw,envelope,triangle";

/// Coincidence rate sampled over a delay scan.
///
/// `r_norm = r_raw / background`; `envelope` is the modulation term that
/// multiplies `triangle` so that `r_norm = 1 - triangle * envelope`.
#[derive(Debug, Clone, PartialEq)]
pub struct DipTrace {
    pub taus: Vec<f64>,
    pub r_norm: Vec<f64>,
    pub r_raw: Vec<f64>,
    pub envelope: Vec<f64>,
    pub triangle: Vec<f64>,
    pub background: f64,
}

impl DipTrace {
    /// Builds a trace from a background level and the envelope samples.
    pub fn from_envelope(taus: Vec<f64>, triangle: Vec<f64>, envelope: Vec<f64>, background: f64) -> Self {
        let r_norm: Vec<f64> = triangle.iter().zip(&envelope).map(|(t, e)| 1.0 - t * e).collect();
        let r_raw = r_norm.iter().map(|r| r * background).collect();
        Self {
            taus,
            r_norm,
            r_raw,
            envelope,
            triangle,
            background,
        }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn min_r_norm(&self) -> f64 {
        self.r_norm.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `1 - R_min / R_background` on the normalized trace.
    pub fn visibility(&self) -> f64 {
        1.0 - self.min_r_norm()
    }

    /// Delay of the largest envelope sample.
    pub fn envelope_center(&self) -> f64 {
        let mut best = 0;
        for (i, e) in self.envelope.iter().enumerate() {
            if *e > self.envelope[best] {
                best = i;
            }
        }
        self.taus[best]
    }

    /// Largest pointwise difference of the normalized traces.
    pub fn max_abs_diff(&self, other: &DipTrace) -> f64 {
        self.r_norm
            .iter()
            .zip(&other.r_norm)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Comma-delimited text with `#` header comments.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# coincidence-rate trace");
        let _ = writeln!(s, "# config_hash: {config_hash}");
        let _ = writeln!(s, "# background: {:.16e}", self.background);
        let _ = writeln!(s, "# columns: {COLUMNS}");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.taus[i] * FS,
                self.r_norm[i],
                self.r_raw[i],
                self.envelope[i],
                self.triangle[i]
            );
        }
        s
    }

    /// Parses [`DipTrace::to_csv`] output. Delays come back in seconds.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| HomError::Format { what: "trace", reason };
        let mut t = DipTrace {
            taus: Vec::new(),
            r_norm: Vec::new(),
            r_raw: Vec::new(),
            envelope: Vec::new(),
            triangle: Vec::new(),
            background: f64::NAN,
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("background:") {
                    t.background = v.trim().parse().map_err(|e| bad(format!("background: {e}")))?;
                }
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("row `{line}`: {e}")))?;
            if v.len() != 5 {
                return Err(bad(format!("row `{line}` needs 5 columns")));
            }
            t.taus.push(v[0] / FS);
            t.r_norm.push(v[1]);
            t.r_raw.push(v[2]);
            t.envelope.push(v[3]);
            t.triangle.push(v[4]);
        }
        if t.background.is_nan() {
            return Err(bad("missing background header".into()));
        }
        Ok(t)
    }
}
