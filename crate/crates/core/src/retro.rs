//! Full-sample (retrospective) break procedures.
//!
//! Segments are half-open row ranges `[i, j)` of the regression design.
//! Reported breakpoints are 1-based series positions of the last observation
//! of each regime but the final one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detectors::DetectorPath;
use crate::linreg::{ols_fit, Design, FitResult};
use crate::monitor::ModelKind;
use crate::timeseries::TimeSeries;
use crate::{Error, Result};

/// Largest reported F statistic (reached when the segmented fit is exact).
pub const F_CAP: f64 = 1e12;

/// 5% critical value of `sup |B(r)|` for a Brownian bridge.
pub const BRIDGE_SUP_5PCT: f64 = 1.358;

pub const DEFAULT_TRIM: f64 = 0.15;
pub const DEFAULT_MAX_BREAKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    #[default]
    Mean,
    Ar1,
}

impl DesignKind {
    fn model(self) -> ModelKind {
        match self {
            Self::Mean => ModelKind::Mean,
            Self::Ar1 => ModelKind::Ar1,
        }
    }

    pub fn p(self) -> usize {
        self.model().p()
    }

    fn offset(self) -> usize {
        self.model().offset()
    }

    fn design(self, series: &TimeSeries) -> Result<Design> {
        self.model().design(series, 0..series.len())
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Ar1 => "ar1",
        })
    }
}

impl FromStr for DesignKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" | "mean_only" | "mean-only" => Ok(Self::Mean),
            "ar1" => Ok(Self::Ar1),
            other => Err(Error::InvalidInput(format!("unknown design {other:?} (expected mean or ar1)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakEstimate {
    pub breakpoints: Vec<usize>,
    pub ssr: f64,
    #[serde(skip)]
    pub per_regime: Vec<FitResult>,
}

/// Streaming co-moments for the SSR of a mean or simple-regression fit.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mx: f64,
    my: f64,
    cxx: f64,
    cxy: f64,
    cyy: f64,
}

impl Moments {
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        let dx = x - self.mx;
        let dy = y - self.my;
        self.mx += dx / self.n;
        self.my += dy / self.n;
        self.cxx += dx * (x - self.mx);
        self.cxy += dx * (y - self.my);
        self.cyy += dy * (y - self.my);
    }

    fn ssr(&self, kind: DesignKind) -> f64 {
        match kind {
            DesignKind::Mean => self.cyy,
            DesignKind::Ar1 => {
                if self.cxx > 0.0 {
                    (self.cyy - self.cxy * self.cxy / self.cxx).max(0.0)
                } else {
                    self.cyy
                }
            }
        }
    }
}

/// `(x, y)` pairs of the design rows (`x` is the lag for `ar1`, unused for `mean`).
fn pairs(series: &TimeSeries, kind: DesignKind) -> Vec<(f64, f64)> {
    let v = series.values();
    match kind {
        DesignKind::Mean => v.iter().map(|&y| (0.0, y)).collect(),
        DesignKind::Ar1 => v.windows(2).map(|w| (w[0], w[1])).collect(),
    }
}

fn regime_fits(design: &Design, cuts: &[usize]) -> Vec<FitResult> {
    let mut bounds = vec![0];
    bounds.extend_from_slice(cuts);
    bounds.push(design.rows());
    bounds
        .windows(2)
        .filter_map(|w| ols_fit(&design.slice(w[0]..w[1])).ok())
        .collect()
}

/// Least-squares single break in the mean: `argmin_k S(k)` over `k = 1..N-1`,
/// with the segments `1..=k` and `k+1..=N`. Ties go to the smallest `k`.
pub fn single_break_ls(series: &TimeSeries) -> Result<BreakEstimate> {
    let y = series.values();
    let n = y.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, available: n });
    }
    let mut s = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, v) in y.iter().enumerate() {
        s[i + 1] = s[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    let seg = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let sum = s[b] - s[a];
        (s2[b] - s2[a] - sum * sum / m).max(0.0)
    };
    let mut best = (f64::INFINITY, 0);
    for k in 1..n {
        let v = seg(0, k) + seg(k, n);
        if v < best.0 {
            best = (v, k);
        }
    }
    let design = DesignKind::Mean.design(series)?;
    Ok(BreakEstimate {
        breakpoints: vec![best.1],
        ssr: best.0,
        per_regime: regime_fits(&design, &[best.1]),
    })
}

fn min_segment(rows: usize, trim: f64, p: usize) -> Result<usize> {
    if !(trim > 0.0 && trim < 0.5) {
        return Err(Error::Infeasible(format!("trim must lie in (0, 0.5), got {trim}")));
    }
    if trim * (rows as f64) < (p + 2) as f64 {
        return Err(Error::Infeasible(format!(
            "trim {trim} leaves segments shorter than p + 2 = {} on {rows} rows",
            p + 2
        )));
    }
    Ok((trim * rows as f64).ceil() as usize)
}

/// Global minimum-SSR partitions with `1..=max_breaks` breaks and minimum
/// segment length `ceil(trim * rows)`, by dynamic programming over segment SSRs.
pub fn bai_perron(series: &TimeSeries, max_breaks: usize, trim: f64, kind: DesignKind) -> Result<Vec<BreakEstimate>> {
    let data = pairs(series, kind);
    let rows = data.len();
    let h = min_segment(rows, trim, kind.p())?;
    if max_breaks == 0 {
        return Err(Error::InvalidInput("max_breaks must be >= 1".into()));
    }
    if (max_breaks + 1) * h > rows {
        return Err(Error::Infeasible(format!(
            "{max_breaks} breaks with minimum segment {h} need {} rows, have {rows}",
            (max_breaks + 1) * h
        )));
    }

    // cost[m][j]: best SSR for rows [0, j) split into m + 1 segments.
    let layers = max_breaks + 1;
    let mut cost = vec![vec![f64::INFINITY; rows + 1]; layers];
    let mut back = vec![vec![0usize; rows + 1]; layers];
    // Segments are enumerated by start i; all segments ending at i come from
    // earlier starts, so cost[..][i] is final when start i is processed.
    for i in 0..=rows - h {
        let mut mom = Moments::default();
        for (j, &(x, y)) in data.iter().enumerate().skip(i) {
            mom.push(x, y);
            let end = j + 1;
            if end - i < h {
                continue;
            }
            let ssr = mom.ssr(kind);
            if i == 0 {
                cost[0][end] = ssr;
                continue;
            }
            for m in 1..layers {
                let prev = cost[m - 1][i];
                if prev.is_finite() && prev + ssr < cost[m][end] {
                    cost[m][end] = prev + ssr;
                    back[m][end] = i;
                }
            }
        }
    }

    let design = kind.design(series)?;
    let offset = kind.offset();
    (1..layers)
        .map(|m| {
            let ssr = cost[m][rows];
            if !ssr.is_finite() {
                return Err(Error::Infeasible(format!("no admissible partition with {m} breaks")));
            }
            let mut cuts = Vec::with_capacity(m);
            let mut end = rows;
            for layer in (1..=m).rev() {
                end = back[layer][end];
                cuts.push(end);
            }
            cuts.reverse();
            Ok(BreakEstimate {
                breakpoints: cuts.iter().map(|c| c + offset).collect(),
                ssr,
                per_regime: regime_fits(&design, &cuts),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupF {
    pub stat: f64,
    /// Breakpoint (1-based last observation of the first regime) maximising F.
    pub argmax: usize,
    /// `stat > critical` when a critical value was supplied.
    pub reject: Option<bool>,
}

/// `sup_k F(k)` with `F(k) = ((SSR_0 - SSR_1(k)) / p) / (SSR_1(k) / (rows - 2p))`
/// over single-break partitions with both segments at least `ceil(trim * rows)` long.
pub fn sup_f(series: &TimeSeries, trim: f64, kind: DesignKind, critical: Option<f64>) -> Result<SupF> {
    let data = pairs(series, kind);
    let rows = data.len();
    let p = kind.p();
    let h = min_segment(rows, trim, p)?;
    if 2 * h > rows || rows <= 2 * p {
        return Err(Error::Infeasible(format!("trim {trim} leaves no admissible break on {rows} rows")));
    }
    let mut left = vec![0.0; rows + 1];
    let mut mom = Moments::default();
    for (j, &(x, y)) in data.iter().enumerate() {
        mom.push(x, y);
        left[j + 1] = mom.ssr(kind);
    }
    let ssr0 = left[rows];
    let mut right = vec![0.0; rows + 1];
    let mut mom = Moments::default();
    for j in (0..rows).rev() {
        let (x, y) = data[j];
        mom.push(x, y);
        right[j] = mom.ssr(kind);
    }
    let dof = (rows - 2 * p) as f64;
    let mut best = (f64::NEG_INFINITY, h);
    for k in h..=rows - h {
        let ssr1 = left[k] + right[k];
        let gain = (ssr0 - ssr1).max(0.0);
        let f = if ssr1 <= ssr0 * 1e-15 || ssr1 == 0.0 {
            if gain > 0.0 { F_CAP } else { 0.0 }
        } else {
            ((gain / p as f64) / (ssr1 / dof)).min(F_CAP)
        };
        if f > best.0 {
            best = (f, k);
        }
    }
    Ok(SupF {
        stat: best.0,
        argmax: best.1 + kind.offset(),
        reject: critical.map(|c| best.0 > c),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RetroCusumSq {
    /// `times` are `r = k / rows`; the boundary is the constant [`BRIDGE_SUP_5PCT`].
    pub path: DetectorPath,
    /// 1-based series position at which `|path|` peaks; `None` for a zero path.
    pub argmax: Option<usize>,
}

/// Centred partial sums of squared full-sample residuals,
/// `sum_{i<=k} (e_i^2 - mean e^2) / (sqrt(rows) sd(e^2))`.
pub fn retro_cusum_sq(series: &TimeSeries, kind: DesignKind) -> Result<RetroCusumSq> {
    let design = kind.design(series)?;
    let fit = ols_fit(&design)?;
    let rows = design.rows();
    let sq: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let mean = sq.iter().sum::<f64>() / rows as f64;
    let sd = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64).sqrt();
    let mut path = DetectorPath::default();
    let mut acc = 0.0;
    let mut best: Option<(f64, usize)> = None;
    let flat = !(sd > 1e-12 * mean.max(f64::MIN_POSITIVE)) || sd == 0.0;
    for (i, v) in sq.iter().enumerate() {
        let k = i + 1;
        let value = if flat {
            0.0
        } else {
            acc += v - mean;
            acc / ((rows as f64).sqrt() * sd)
        };
        path.push(k, k as f64 / rows as f64, Some(value), BRIDGE_SUP_5PCT);
        if value.abs() > best.map_or(0.0, |b| b.0) {
            best = Some((value.abs(), k));
        }
    }
    Ok(RetroCusumSq {
        path,
        argmax: best.map(|(_, k)| k + kind.offset()),
    })
}
