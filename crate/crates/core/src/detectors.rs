//! Streaming fluctuation detectors.
//!
//! A [`DetectorState`] is built from the historical design (the first `n_h`
//! regression rows) and then fed one monitoring row at a time. Estimates-based
//! detectors (RE, ME) compare updated coefficients with the frozen historical
//! fit; residual-based detectors (OLS-CUSUM, OLS-MOSUM, OLS-CUSUM-SQ) cumulate
//! residuals computed with the historical coefficients. All values are scaled
//! by `1 / sqrt(n_h)` so they are comparable with boundaries on the clock
//! `t = 1 + k/n`.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linreg::{accumulate, dot, ols_fit, Design, FitResult, RecursiveOls};
use crate::matrix::{solve_spd, sym_sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Re,
    Me,
    OlsCusum,
    OlsMosum,
    OlsCusumSq,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        Self::Re,
        Self::Me,
        Self::OlsCusum,
        Self::OlsMosum,
        Self::OlsCusumSq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Re => "re",
            Self::Me => "me",
            Self::OlsCusum => "ols-cusum",
            Self::OlsMosum => "ols-mosum",
            Self::OlsCusumSq => "ols-cusum-sq",
        }
    }

    pub fn uses_window(self) -> bool {
        matches!(self, Self::Me | Self::OlsMosum)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown detector {s:?} (expected re, me, ols-cusum, ols-mosum, ols-cusum-sq)"
                ))
            })
    }
}

/// Reduction of the RE/ME coefficient-difference vector to a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Max,
    Euclidean,
}

impl Norm {
    fn apply(self, v: &DVector<f64>) -> f64 {
        match self {
            Norm::Max => v.amax(),
            Norm::Euclidean => v.norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    /// Window fraction for ME and OLS-MOSUM.
    #[serde(default = "default_h")]
    pub h: f64,
    /// RE/ME: scale by the moment matrix of the current sample instead of the historical one.
    #[serde(default)]
    pub rescale: bool,
    #[serde(default)]
    pub norm: Norm,
    /// OLS-MOSUM: multiply by the clock `t` (compatibility with the alternative prefactor).
    #[serde(default)]
    pub mosum_time_factor: bool,
    /// OLS-CUSUM-SQ: centre at the squared historical mean square instead of the mean square.
    #[serde(default)]
    pub cusum_sq_as_printed: bool,
}

fn default_h() -> f64 {
    0.5
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            h: default_h(),
            rescale: false,
            norm: Norm::Max,
            mosum_time_factor: false,
            cusum_sq_as_printed: false,
        }
    }

    pub fn with_h(mut self, h: f64) -> Result<Self> {
        self.h = h;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::InvalidInput(format!("window fraction h must lie in (0, 1], got {}", self.h)));
        }
        Ok(self)
    }

    /// Window length `floor(n_h h)` for the windowed kinds.
    pub fn window(&self, n_h: usize) -> usize {
        (n_h as f64 * self.h).floor() as usize
    }
}

/// Detector values over monitoring time with aligned boundary values.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DetectorPath {
    /// Monitoring step `k` (1-based).
    pub ks: Vec<usize>,
    pub times: Vec<f64>,
    /// Signed detector value; `None` while a moving window is still filling.
    pub values: Vec<Option<f64>>,
    /// `+inf` where the boundary is inactive.
    pub boundary_values: Vec<f64>,
}

impl DetectorPath {
    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn push(&mut self, k: usize, t: f64, value: Option<f64>, boundary: f64) {
        self.ks.push(k);
        self.times.push(t);
        self.values.push(value);
        self.boundary_values.push(boundary);
    }

    /// Whether position `i` satisfies `|value| >= boundary`.
    pub fn crossed(&self, i: usize) -> bool {
        self.values[i].is_some_and(|v| v.abs() >= self.boundary_values[i])
    }

    /// Position of the first crossing.
    pub fn first_crossing(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.crossed(i))
    }

    /// CSV with columns `k,t,value,boundary,crossed` (and `label` when given).
    pub fn write_csv<W: Write>(&self, writer: W, labels: Option<&[Option<String>]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["k", "t", "value", "boundary", "crossed"];
        if labels.is_some() {
            header.push("label");
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.ks[i].to_string(),
                self.times[i].to_string(),
                self.values[i].map(|v| v.to_string()).unwrap_or_default(),
                self.boundary_values[i].to_string(),
                u8::from(self.crossed(i)).to_string(),
            ];
            if let Some(l) = labels {
                rec.push(l.get(i).cloned().flatten().unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct MovingWindow {
    rows: VecDeque<(Vec<f64>, f64)>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    since_refresh: usize,
}

impl MovingWindow {
    const REFRESH_EVERY: usize = 64;

    fn push(&mut self, x: &[f64], y: f64) {
        accumulate(&mut self.xtx, &mut self.xty, x, y, 1.0);
        self.rows.push_back((x.to_vec(), y));
        let (ox, oy) = self.rows.pop_front().expect("window is non-empty");
        accumulate(&mut self.xtx, &mut self.xty, &ox, oy, -1.0);
        self.since_refresh += 1;
        if self.since_refresh >= Self::REFRESH_EVERY {
            self.xtx.fill(0.0);
            self.xty.fill(0.0);
            for (x, y) in &self.rows {
                accumulate(&mut self.xtx, &mut self.xty, x, *y, 1.0);
            }
            self.since_refresh = 0;
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Re(Box<RecursiveOls>),
    Me(MovingWindow),
    Cusum { sum: f64 },
    Mosum { window: VecDeque<f64>, sum: f64, width: usize },
    CusumSq { sum: f64, centre: f64, scale: f64 },
}

/// Single-stream detector state.
#[derive(Debug, Clone)]
pub struct DetectorState {
    spec: DetectorSpec,
    fit: FitResult,
    n_h: usize,
    k: usize,
    omega_sqrt: DMatrix<f64>,
    inner: Inner,
}

impl DetectorState {
    /// Fits the historical design and prepares the accumulators.
    pub fn new(spec: DetectorSpec, historical: &Design) -> Result<Self> {
        let spec = spec.validated()?;
        let fit = ols_fit(historical)?;
        let n_h = historical.rows();
        let p = historical.p();
        let residual_based = matches!(
            spec.kind,
            DetectorKind::OlsCusum | DetectorKind::OlsMosum | DetectorKind::OlsCusumSq
        );
        let y_scale = historical.response().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residual_based && !(fit.sigma_hat > 1e-12 * y_scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::DegenerateVariance("historical residual scale is zero".into()));
        }
        let inner = match spec.kind {
            DetectorKind::Re => Inner::Re(Box::new(RecursiveOls::new(historical, n_h)?)),
            DetectorKind::Me => {
                let w = spec.window(n_h);
                if w < p + 1 {
                    return Err(Error::InvalidInput(format!(
                        "moving window floor(n h) = {w} below p+1 = {}",
                        p + 1
                    )));
                }
                let rows: VecDeque<_> = (n_h - w..n_h)
                    .map(|i| (historical.row(i).to_vec(), historical.response()[i]))
                    .collect();
                let (xtx, xty) = historical.cross_products(n_h - w..n_h);
                Inner::Me(MovingWindow {
                    rows,
                    xtx,
                    xty,
                    since_refresh: 0,
                })
            }
            DetectorKind::OlsCusum => Inner::Cusum { sum: 0.0 },
            DetectorKind::OlsMosum => {
                let width = spec.window(n_h);
                if width == 0 {
                    return Err(Error::InvalidInput("moving window floor(n h) is zero".into()));
                }
                Inner::Mosum {
                    window: VecDeque::with_capacity(width + 1),
                    sum: 0.0,
                    width,
                }
            }
            DetectorKind::OlsCusumSq => {
                let sq: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
                let mean = sq.iter().sum::<f64>() / n_h as f64;
                let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_h as f64;
                if !(var > 0.0) {
                    return Err(Error::DegenerateVariance(
                        "historical squared residuals are constant".into(),
                    ));
                }
                let centre = if spec.cusum_sq_as_printed { mean * mean } else { mean };
                Inner::CusumSq {
                    sum: 0.0,
                    centre,
                    scale: (n_h as f64).sqrt() * var.sqrt(),
                }
            }
        };
        let omega_sqrt = sym_sqrt(&fit.moment);
        Ok(Self {
            spec,
            fit,
            n_h,
            k: 0,
            omega_sqrt,
            inner,
        })
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    pub fn historical_fit(&self) -> &FitResult {
        &self.fit
    }

    pub fn historical_rows(&self) -> usize {
        self.n_h
    }

    /// Monitoring observations consumed.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Feeds the next monitoring row and returns the updated value.
    pub fn push(&mut self, x: &[f64], y: f64) -> Result<Option<f64>> {
        if x.len() != self.fit.p() {
            return Err(Error::InvalidInput(format!(
                "row has {} regressors, expected {}",
                x.len(),
                self.fit.p()
            )));
        }
        self.k += 1;
        let e = y - dot(x, &self.fit.beta);
        match &mut self.inner {
            Inner::Re(rls) => rls.update(x, y)?,
            Inner::Me(win) => win.push(x, y),
            Inner::Cusum { sum } => *sum += e,
            Inner::Mosum { window, sum, width } => {
                window.push_back(e);
                *sum += e;
                if window.len() > *width {
                    *sum -= window.pop_front().expect("non-empty");
                }
                // Exact re-summation bounds cancellation drift.
                if self.k % 256 == 0 {
                    *sum = window.iter().sum();
                }
            }
            Inner::CusumSq { sum, centre, .. } => *sum += e * e - *centre,
        }
        self.value()
    }

    /// Current signed value (`None` while the MOSUM window fills).
    pub fn value(&self) -> Result<Option<f64>> {
        let sigma = self.fit.sigma_hat;
        let root_n = (self.n_h as f64).sqrt();
        let v = match &self.inner {
            Inner::Re(rls) => {
                let m = rls.count() as f64;
                let omega = if self.spec.rescale {
                    sym_sqrt(&(rls.xtx() / m))
                } else {
                    self.omega_sqrt.clone()
                };
                self.scaled_gap(m, &omega, &(rls.beta() - &self.fit.beta), sigma, root_n)
            }
            Inner::Me(win) => {
                let w = win.rows.len() as f64;
                let beta = solve_spd(&win.xtx, &win.xty, Some(self.n_h + self.k))?;
                let omega = if self.spec.rescale {
                    sym_sqrt(&(&win.xtx / w))
                } else {
                    self.omega_sqrt.clone()
                };
                self.scaled_gap(w, &omega, &(beta - &self.fit.beta), sigma, root_n)
            }
            Inner::Cusum { sum } => sum / (sigma * root_n),
            Inner::Mosum { window, sum, width } => {
                if window.len() < *width {
                    return Ok(None);
                }
                let factor = if self.spec.mosum_time_factor {
                    (self.n_h + self.k) as f64 / self.n_h as f64
                } else {
                    1.0
                };
                factor * sum / (sigma * root_n)
            }
            Inner::CusumSq { sum, scale, .. } => sum / scale,
        };
        Ok(Some(v))
    }

    fn scaled_gap(&self, weight: f64, omega_sqrt: &DMatrix<f64>, gap: &DVector<f64>, sigma: f64, root_n: f64) -> f64 {
        let norm = self.spec.norm.apply(&(omega_sqrt * gap));
        if sigma > 0.0 {
            weight * norm / (sigma * root_n)
        } else if norm <= 1e-9 * (1.0 + self.fit.beta.amax()) {
            // a perfect historical fit that is still perfect
            0.0
        } else {
            f64::INFINITY
        }
    }
}
