//! Stopping-time engine: streams the monitoring period through a detector and
//! stops at the first `|value| >= b(t_k)`, `t_k = 1 + k/n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boundaries::{Boundary, BoundaryKind};
use crate::detectors::{DetectorPath, DetectorSpec, DetectorState};
use crate::linreg::{ar1_design, mean_design, Design};
use crate::timeseries::{SampleSplit, TimeSeries};
use crate::{Error, Result};

/// Regression fitted on the historical sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `y_t = mu + rho y_{t-1} + e_t`; the first observation is consumed as a lag.
    #[default]
    Ar1,
    /// `y_t = mu + e_t`.
    Mean,
}

impl ModelKind {
    pub fn p(self) -> usize {
        match self {
            Self::Ar1 => 2,
            Self::Mean => 1,
        }
    }

    /// Series observations consumed before the first regression row.
    pub fn offset(self) -> usize {
        match self {
            Self::Ar1 => 1,
            Self::Mean => 0,
        }
    }

    pub fn design(self, series: &TimeSeries, range: std::ops::Range<usize>) -> Result<Design> {
        match self {
            Self::Ar1 => ar1_design(series, range),
            Self::Mean => mean_design(series, range),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ar1 => "ar1",
            Self::Mean => "mean",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ar1" => Ok(Self::Ar1),
            "mean" | "mean_only" | "mean-only" => Ok(Self::Mean),
            other => Err(Error::InvalidInput(format!("unknown model {other:?} (expected ar1 or mean)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonitorOptions {
    pub model: ModelKind,
    /// Keep evaluating after the first crossing so the whole path is available.
    pub complete_path: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorResult {
    pub detected: bool,
    /// Monitoring observations consumed at the first crossing.
    pub tau: Option<usize>,
    pub tau_label: Option<String>,
    pub n: usize,
    #[serde(rename = "N")]
    pub total: usize,
    pub detector: DetectorSpec,
    pub boundary: Boundary,
    pub model: ModelKind,
    #[serde(skip)]
    pub path: DetectorPath,
}

/// Boundary value at monitoring step `k`, with points outside the
/// boundary's domain treated as inactive (`+inf`).
pub fn boundary_at(boundary: &Boundary, k: usize, n: usize) -> Result<f64> {
    let t = 1.0 + k as f64 / n as f64;
    match boundary.on_clock(t) {
        Ok(b) => Ok(b),
        Err(Error::Domain { .. }) if matches!(boundary.kind, BoundaryKind::B8 | BoundaryKind::B9) => {
            Ok(f64::INFINITY)
        }
        Err(e) => Err(e),
    }
}

pub fn run_monitor(series: &TimeSeries, split: &SampleSplit, det: &DetectorSpec, boundary: &Boundary) -> Result<MonitorResult> {
    run_monitor_with(series, split, det, boundary, &MonitorOptions::default())
}

pub fn run_monitor_with(
    series: &TimeSeries,
    split: &SampleSplit,
    det: &DetectorSpec,
    boundary: &Boundary,
    opts: &MonitorOptions,
) -> Result<MonitorResult> {
    let (n, total) = (split.n, split.total);
    if series.len() < total {
        return Err(Error::InsufficientData {
            needed: total,
            available: series.len(),
        });
    }
    if n == 0 || n >= total {
        return Err(Error::InvalidInput(format!("split needs 1 <= n < N, got n = {n}, N = {total}")));
    }
    let boundary = boundary.historical_size(n)?;
    let design = opts.model.design(series, 0..total)?;
    let n_h = n - opts.model.offset();
    let mut state = DetectorState::new(*det, &design.slice(0..n_h))?;

    let mut path = DetectorPath::default();
    let mut tau = None;
    for k in 1..=total - n {
        let row = n_h + k - 1;
        let value = state
            .push(design.row(row), design.response()[row])
            .map_err(|e| Error::Monitoring { k, source: Box::new(e) })?;
        let b = boundary_at(&boundary, k, n)?;
        path.push(k, 1.0 + k as f64 / n as f64, value, b);
        if tau.is_none() && path.crossed(path.len() - 1) {
            tau = Some(k);
            if !opts.complete_path {
                break;
            }
        }
    }
    Ok(MonitorResult {
        detected: tau.is_some(),
        tau,
        tau_label: tau.and_then(|k| series.label(n + k - 1).map(str::to_owned)),
        n,
        total,
        detector: *det,
        boundary,
        model: opts.model,
        path,
    })
}

/// First monitoring step `k` with `|value| / boundary >= lambda_n`.
pub fn decision_rule_ratio(path: &DetectorPath, lambda_n: f64) -> Option<usize> {
    (0..path.len())
        .find(|&i| {
            let b = path.boundary_values[i];
            path.values[i].is_some_and(|v| b.is_finite() && v.abs() / b >= lambda_n)
        })
        .map(|i| path.ks[i])
}
