//! Run configuration: flat key-value text with dotted sections, plus total
//! validation (out-of-range fields are named errors, never clamped).

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial::{DataKind, DataSpec};

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub dim: usize,
    pub grid: usize,
    pub data_kind: String,
    pub epsilon: f64,
    pub mode_k: Vec<i64>,
    pub mode_m: Vec<i64>,
    /// Flattened (re, im) pairs; empty = default coefficient vector.
    pub b: Vec<f64>,
    pub seed: u64,
    pub horizon: f64,
    pub probe_times: Vec<f64>,
    pub safety: f64,
    pub deriv_stride: usize,
    /// Probe step for identity snapshot triples.
    pub probe_dt: f64,
    /// Flow time at which verify takes its snapshot triple.
    pub probe_time: f64,
    /// Per-case tolerance overrides, e.g. "ev_curvature=1e-2".
    pub tolerance_overrides: Vec<(String, f64)>,
    /// Bound for the smoothing-estimate monitors.
    pub monitor_bound: f64,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            grid: 12,
            data_kind: "rank_one".into(),
            epsilon: 0.05,
            mode_k: Vec::new(),
            mode_m: Vec::new(),
            b: Vec::new(),
            seed: 1,
            horizon: 0.2,
            probe_times: Vec::new(),
            safety: 0.2,
            deriv_stride: 1,
            probe_dt: 1e-4,
            probe_time: 0.02,
            tolerance_overrides: Vec::new(),
            monitor_bound: 50.0,
        output_dir: ".".into(),
        }
    }
}

impl RunConfig {
    /// Parse the flat `section.key = value` format. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key}: {what} (got '{value}')"));
        match key {
            "dim" => self.dim = value.parse().map_err(|_| bad("expected integer"))?,
            "grid" => self.grid = value.parse().map_err(|_| bad("expected integer"))?,
            "data.kind" => self.data_kind = value.to_string(),
            "data.epsilon" => {
                self.epsilon = value.parse().map_err(|_| bad("expected real"))?
            }
            "data.mode_k" => self.mode_k = parse_int_list(value).ok_or_else(|| bad("expected comma-separated integers"))?,
            "data.mode_m" => self.mode_m = parse_int_list(value).ok_or_else(|| bad("expected comma-separated integers"))?,
            "data.b" => {
                self.b = parse_f64_list(value)
                    .ok_or_else(|| bad("expected comma-separated re,im pairs"))?
            }
            "data.seed" => self.seed = value.parse().map_err(|_| bad("expected integer"))?,
            "flow.horizon" => self.horizon = value.parse().map_err(|_| bad("expected real"))?,
            "flow.probe_times" => {
                self.probe_times = parse_f64_list(value).ok_or_else(|| bad("expected reals"))?
            }
            "flow.safety" => self.safety = value.parse().map_err(|_| bad("expected real"))?,
            "flow.deriv_stride" => {
                self.deriv_stride = value.parse().map_err(|_| bad("expected integer"))?
            }
            "verify.probe_dt" => self.probe_dt = value.parse().map_err(|_| bad("expected real"))?,
            "verify.probe_time" => {
                self.probe_time = value.parse().map_err(|_| bad("expected real"))?
            }
            "report.monitor_bound" => {
                self.monitor_bound = value.parse().map_err(|_| bad("expected real"))?
            }
            "output.dir" => self.output_dir = value.to_string(),
            _ if key.starts_with("tolerance.") => {
                let case = key.trim_start_matches("tolerance.").to_string();
                let tol: f64 = value.parse().map_err(|_| bad("expected real"))?;
                self.tolerance_overrides.push((case, tol));
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Total validation per the documented ranges.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!(
                "dim: must be 1, 2 or 3 (got {})",
                self.dim
            )));
        }
        if self.grid % 2 != 0 || !(4..=64).contains(&self.grid) {
            return Err(Error::Config(format!(
                "grid: must be even and within 4..=64 (got {})",
                self.grid
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "flow.horizon: must be > 0 (got {})",
                self.horizon
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "data.epsilon: must be > 0 (got {})",
                self.epsilon
            )));
        }
        if !(self.safety > 0.0) {
            return Err(Error::Config(format!(
                "flow.safety: must be > 0 (got {})",
                self.safety
            )));
        }
        if self.deriv_stride == 0 {
            return Err(Error::Config("flow.deriv_stride: must be >= 1".into()));
        }
        if !(self.probe_dt > 0.0) {
            return Err(Error::Config(format!(
                "verify.probe_dt: must be > 0 (got {})",
                self.probe_dt
            )));
        }
        DataKind::parse(&self.data_kind)?;
        if !self.b.is_empty() && self.b.len() != 2 * self.dim {
            return Err(Error::Config(format!(
                "data.b: expected {} values (re,im per axis), got {}",
                2 * self.dim,
                self.b.len()
            )));
        }
        for t in &self.probe_times {
            if !(*t > 0.0) {
                return Err(Error::Config(format!(
                    "flow.probe_times: must be > 0 (got {t})"
                )));
            }
        }
        for (case, tol) in &self.tolerance_overrides {
            crate::identity::CaseId::parse(case)?;
            if !(*tol > 0.0) {
                return Err(Error::Config(format!("tolerance.{case}: must be > 0")));
            }
        }
        Ok(())
    }

    pub fn data_spec(&self) -> Result<DataSpec> {
        let kind = DataKind::parse(&self.data_kind)?;
        let mut spec = DataSpec::defaults(kind, self.dim);
        spec.epsilon = self.epsilon;
        spec.seed = self.seed;
        if !self.mode_k.is_empty() {
            if self.mode_k.len() != self.dim {
                return Err(Error::Config(format!(
                    "data.mode_k: expected {} entries, got {}",
                    self.dim,
                    self.mode_k.len()
                )));
            }
            spec.mode_k = self.mode_k.clone();
        }
        if !self.mode_m.is_empty() {
            if self.mode_m.len() != self.dim {
                return Err(Error::Config(format!(
                    "data.mode_m: expected {} entries, got {}",
                    self.dim,
                    self.mode_m.len()
                )));
            }
            spec.mode_m = self.mode_m.clone();
        }
        if !self.b.is_empty() {
            spec.b = self
                .b
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
        }
        Ok(spec)
    }
}

fn parse_int_list(value: &str) -> Option<Vec<i64>> {
    if value.is_empty() {
        return Some(Vec::new());
    }
    value.split(',').map(|v| v.trim().parse().ok()).collect()
}

fn parse_f64_list(value: &str) -> Option<Vec<f64>> {
    if value.is_empty() {
        return Some(Vec::new());
    }
    value.split(',').map(|v| v.trim().parse().ok()).collect()
}
