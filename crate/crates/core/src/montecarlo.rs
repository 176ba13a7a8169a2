//! Size, power and run-length experiments on simulated AR(1) data.
//!
//! Data follow `y_t = mu + rho y_{t-1} + e_t` with standard normal (or
//! GARCH(1,1)) innovations and 200 discarded burn-in draws. A break moves
//! `mu` or `rho` to `break_to` for observations `t > kappa`, where
//! `kappa = n + ceil(loc (N - n))`. Replication `b` draws from its own
//! stream, so reports are identical for any thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::Boundary;
use crate::detectors::DetectorSpec;
use crate::garch::GarchParams;
use crate::monitor::{run_monitor_with, ModelKind, MonitorOptions};
use crate::rng::replication_rng;
use crate::timeseries::{SampleSplit, TimeSeries};
use crate::{Error, Result};

pub const BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakKind {
    #[default]
    None,
    MuShift,
    RhoShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub break_kind: BreakKind,
    /// Post-break value of the shifted parameter.
    #[serde(default)]
    pub break_to: Option<f64>,
    /// Break location as a fraction of the monitoring period (also the
    /// notional location for run lengths under no break).
    #[serde(default = "default_loc")]
    pub break_loc: f64,
    /// GARCH(1,1) innovations; only `omega`, `alpha`, `beta` are used.
    #[serde(default)]
    pub garch: Option<GarchParams>,
}

fn default_mu() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    0.3
}
fn default_loc() -> f64 {
    0.5
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            mu: default_mu(),
            rho: default_rho(),
            break_kind: BreakKind::None,
            break_to: None,
            break_loc: default_loc(),
            garch: None,
        }
    }
}

impl DgpSpec {
    pub fn no_break(rho: f64) -> Self {
        Self { rho, ..Self::default() }
    }

    pub fn mu_shift(to: f64, loc: f64) -> Self {
        Self {
            break_kind: BreakKind::MuShift,
            break_to: Some(to),
            break_loc: loc,
            ..Self::default()
        }
    }

    pub fn rho_shift(to: f64, loc: f64) -> Self {
        Self {
            break_kind: BreakKind::RhoShift,
            break_to: Some(to),
            break_loc: loc,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidInput(format!("|rho| must be below 1, got {}", self.rho)));
        }
        if !(self.break_loc > 0.0 && self.break_loc < 1.0) {
            return Err(Error::InvalidInput(format!("break_loc must lie in (0, 1), got {}", self.break_loc)));
        }
        match (self.break_kind, self.break_to) {
            (BreakKind::None, _) => {}
            (_, None) => return Err(Error::InvalidInput("break_to is required for a break".into())),
            (BreakKind::RhoShift, Some(r)) if !(r.abs() < 1.0) => {
                return Err(Error::InvalidInput(format!("post-break |rho| must be below 1, got {r}")))
            }
            _ => {}
        }
        if let Some(g) = &self.garch {
            g.validate()?;
        }
        Ok(())
    }

    /// Monitoring steps before the (notional) break: `ceil(loc (N - n))`.
    pub fn break_offset(&self, n: usize, total: usize) -> usize {
        (self.break_loc * (total - n) as f64).ceil() as usize
    }

    fn params_at(&self, t: usize, kappa: usize) -> (f64, f64) {
        match (self.break_kind, self.break_to) {
            (BreakKind::MuShift, Some(to)) if t > kappa => (to, self.rho),
            (BreakKind::RhoShift, Some(to)) if t > kappa => (self.mu, to),
            _ => (self.mu, self.rho),
        }
    }

    /// Draws `total` observations (1-based times `1..=total`) with the break after `kappa`.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, total: usize, rng: &mut R) -> Vec<f64> {
        let kappa = n + self.break_offset(n, total);
        let mut y = self.mu / (1.0 - self.rho);
        let mut h = self.garch.map_or(1.0, |g| g.unconditional_variance());
        let mut e_prev = 0.0;
        let mut out = Vec::with_capacity(total);
        for step in 0..BURN_IN + total {
            let z: f64 = rng.sample(StandardNormal);
            let e = match &self.garch {
                Some(g) => {
                    if step > 0 {
                        h = g.omega + g.alpha * e_prev * e_prev + g.beta * h;
                    }
                    h.sqrt() * z
                }
                None => z,
            };
            e_prev = e;
            let t = step.saturating_sub(BURN_IN) + 1;
            let (mu, rho) = if step < BURN_IN { (self.mu, self.rho) } else { self.params_at(t, kappa) };
            y = mu + rho * y + e;
            if step >= BURN_IN {
                out.push(y);
            }
        }
        out
    }
}

/// Length-`N` series for horizon `T` from a seed.
pub fn simulate_path(spec: &DgpSpec, n: usize, horizon: f64, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let total = total_len(n, horizon)?;
    let mut rng = replication_rng(seed, 0);
    TimeSeries::new(spec.draw(n, total, &mut rng))
}

fn total_len(n: usize, horizon: f64) -> Result<usize> {
    Ok(SampleSplit::new(n, horizon, usize::MAX)?.total)
}

/// One Monte Carlo cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    #[serde(default)]
    pub dgp: DgpSpec,
    pub detector: DetectorSpec,
    pub boundary: Boundary,
    pub n: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelKind,
}

fn default_horizon() -> f64 {
    SampleSplit::DEFAULT_HORIZON
}
fn default_replications() -> usize {
    2500
}

impl Experiment {
    pub fn new(dgp: DgpSpec, detector: DetectorSpec, boundary: Boundary, n: usize) -> Self {
        Self {
            dgp,
            detector,
            boundary,
            n,
            horizon: default_horizon(),
            replications: default_replications(),
            seed: 0,
            model: ModelKind::Ar1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.detector.validated()?;
        self.boundary.validated()?;
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be >= 1".into()));
        }
        if self.n < self.model.p() + 2 {
            return Err(Error::InvalidInput(format!("n = {} is too small to fit the model", self.n)));
        }
        total_len(self.n, self.horizon).map(|_| ())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub std_error: f64,
    pub detections: usize,
    /// Replications entering the denominator.
    pub replications: usize,
    pub failures: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub total: usize,
    /// Monitoring steps before the (notional) break.
    pub kappa: usize,
    /// Mean of `tau - kappa` over detecting replications.
    pub arl_mean: Option<f64>,
    pub arl_sd: Option<f64>,
    /// Sorted delays `tau - kappa`.
    pub delays: Vec<i64>,
    pub config_echo: Experiment,
}

/// Runs one cell: fraction of replications whose monitoring detects a break
/// anywhere in the monitoring window, plus the delay distribution.
/// Estimation failures are excluded from the denominator when fewer than 1%
/// of replications fail; otherwise the run errors.
pub fn run_experiment(exp: &Experiment) -> Result<McReport> {
    exp.validate()?;
    let total = total_len(exp.n, exp.horizon)?;
    let split = SampleSplit {
        n: exp.n,
        total,
        horizon: exp.horizon,
    };
    let opts = MonitorOptions {
        model: exp.model,
        complete_path: false,
    };
    let outcomes: Vec<Option<Option<usize>>> = (0..exp.replications as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_rng(exp.seed, b);
            let y = exp.dgp.draw(exp.n, total, &mut rng);
            let series = TimeSeries::new(y).ok()?;
            run_monitor_with(&series, &split, &exp.detector, &exp.boundary, &opts)
                .ok()
                .map(|r| r.tau)
        })
        .collect();

    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    if failures * 100 >= exp.replications && failures > 0 {
        return Err(Error::TooManyFailures {
            failures,
            replications: exp.replications,
        });
    }
    let kappa = exp.dgp.break_offset(exp.n, total);
    let mut delays: Vec<i64> = outcomes
        .iter()
        .flatten()
        .flatten()
        .map(|&tau| tau as i64 - kappa as i64)
        .collect();
    delays.sort_unstable();
    let valid = exp.replications - failures;
    let detections = delays.len();
    let rate = detections as f64 / valid as f64;
    let (arl_mean, arl_sd) = moments(&delays);
    Ok(McReport {
        rejection_rate: rate,
        std_error: (rate * (1.0 - rate) / valid as f64).sqrt(),
        detections,
        replications: valid,
        failures,
        n: exp.n,
        total,
        kappa,
        arl_mean,
        arl_sd,
        delays,
        config_echo: *exp,
    })
}

fn moments(d: &[i64]) -> (Option<f64>, Option<f64>) {
    if d.is_empty() {
        return (None, None);
    }
    let n = d.len() as f64;
    let mean = d.iter().map(|&v| v as f64).sum::<f64>() / n;
    let sd = (d.len() > 1)
        .then(|| (d.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

/// Rejection rate under a stable model.
pub fn empirical_size(exp: &Experiment) -> Result<McReport> {
    if exp.dgp.break_kind != BreakKind::None {
        return Err(Error::InvalidInput("empirical size needs a DGP without a break".into()));
    }
    run_experiment(exp)
}

/// Rejection rate under a break.
pub fn empirical_power(exp: &Experiment) -> Result<McReport> {
    if exp.dgp.break_kind == BreakKind::None {
        return Err(Error::InvalidInput("empirical power needs a DGP with a break".into()));
    }
    run_experiment(exp)
}

/// Run-length distribution (with or without a break).
pub fn arl_distribution(exp: &Experiment) -> Result<McReport> {
    run_experiment(exp)
}

/// One report per historical size, all with the experiment's seed.
pub fn power_curve(exp: &Experiment, n_grid: &[usize]) -> Result<Vec<McReport>> {
    if n_grid.is_empty() {
        return Err(Error::InvalidInput("n grid is empty".into()));
    }
    n_grid
        .iter()
        .map(|&n| run_experiment(&Experiment { n, ..*exp }))
        .collect()
}

/// Gaussian kernel density with Silverman's bandwidth
/// `0.9 min(sd, IQR/1.34) m^{-1/5}`, evaluated on `points` equally spaced
/// abscissae spanning the sample plus three bandwidths on each side.
pub fn kernel_density(sample: &[f64], points: usize) -> Vec<(f64, f64)> {
    let m = sample.len();
    if m == 0 || points == 0 {
        return Vec::new();
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / m as f64;
    let sd = if m > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    let q = |p: f64| sorted[((p * (m - 1) as f64).round() as usize).min(m - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 1.0,
    };
    let bw = 0.9 * spread * (m as f64).powf(-0.2);
    let (lo, hi) = (sorted[0] - 3.0 * bw, sorted[m - 1] + 3.0 * bw);
    let norm = 1.0 / (m as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|i| {
            let x = if points == 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
            let d = sorted.iter().map(|v| (-0.5 * ((x - v) / bw).powi(2)).exp()).sum::<f64>() * norm;
            (x, d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundaries::BoundaryKind;
    use crate::detectors::DetectorKind;

    fn exp(dgp: DgpSpec, n: usize, reps: usize, seed: u64) -> Experiment {
        Experiment {
            replications: reps,
            seed,
            ..Experiment::new(
                dgp,
                DetectorSpec::new(DetectorKind::OlsCusum),
                Boundary::new(BoundaryKind::B3, 1.577).unwrap(),
                n,
            )
        }
    }

    #[test]
    fn iid_when_rho_zero() {
        let spec = DgpSpec { mu: 0.0, rho: 0.0, ..DgpSpec::default() };
        let s = simulate_path(&spec, 500, 2.0, 1).unwrap();
        assert_eq!(s.len(), 1000);
        let mean = s.values().iter().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 4.0 / 1000f64.sqrt());
    }

    #[test]
    fn post_break_mean_follows_stationary_formula() {
        let spec = DgpSpec::mu_shift(1.5, 0.01);
        let s = simulate_path(&spec, 1000, 100.0, 2).unwrap();
        let post = &s.values()[2000..];
        let mean = post.iter().sum::<f64>() / post.len() as f64;
        assert!((mean - 1.5 / 0.7).abs() < 0.03, "{mean}");
    }

    #[test]
    fn seeded_paths_reproduce() {
        let spec = DgpSpec::rho_shift(0.7, 0.25);
        let a = simulate_path(&spec, 100, 2.0, 3).unwrap();
        let b = simulate_path(&spec, 100, 2.0, 3).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn break_applies_after_kappa() {
        let spec = DgpSpec::mu_shift(1000.0, 0.25);
        let s = simulate_path(&spec, 100, 2.0, 4).unwrap();
        // kappa = 100 + 25; observation 126 (index 125) is the first shifted one
        assert!(s.values()[124] < 20.0);
        assert!(s.values()[125] > 900.0);
    }

    #[test]
    fn huge_lambda_gives_zero_rate() {
        let mut e = exp(DgpSpec::default(), 50, 50, 5);
        e.boundary = Boundary::new(BoundaryKind::B3, 1e6).unwrap();
        let r = empirical_size(&e).unwrap();
        assert_eq!(r.rejection_rate, 0.0);
        assert!(r.arl_mean.is_none());
    }

    #[test]
    fn immediate_crossing_delay() {
        let mut e = exp(DgpSpec::mu_shift(1.5, 0.5), 50, 20, 6);
        e.boundary = Boundary::new(BoundaryKind::B3, 1e-9).unwrap();
        let r = arl_distribution(&e).unwrap();
        assert_eq!(r.rejection_rate, 1.0);
        assert!(r.delays.iter().all(|&d| d == 1 - r.kappa as i64));
    }

    #[test]
    fn size_and_power_guards() {
        assert!(empirical_size(&exp(DgpSpec::mu_shift(1.5, 0.5), 50, 10, 0)).is_err());
        assert!(empirical_power(&exp(DgpSpec::default(), 50, 10, 0)).is_err());
        assert!(DgpSpec { rho: 1.0, ..DgpSpec::default() }.validate().is_err());
        assert!(DgpSpec { break_loc: 1.0, ..DgpSpec::default() }.validate().is_err());
        assert!(DgpSpec::rho_shift(1.2, 0.5).validate().is_err());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let e = exp(DgpSpec::rho_shift(0.7, 0.25), 50, 200, 7);
        let a = run_experiment(&e).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&e).unwrap());
        assert_eq!(a.delays, b.delays);
        assert_eq!(a.rejection_rate.to_bits(), b.rejection_rate.to_bits());
    }

    #[test]
    fn single_point_curve_matches_power() {
        let e = exp(DgpSpec::rho_shift(0.7, 0.25), 50, 100, 8);
        let c = power_curve(&e, &[50]).unwrap();
        let p = empirical_power(&e).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].delays, p.delays);
    }

    #[test]
    fn kde_integrates_to_one() {
        let sample: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let d = kernel_density(&sample, 512);
        let dx = d[1].0 - d[0].0;
        let area: f64 = d.iter().map(|(_, y)| y * dx).sum();
        assert!((area - 1.0).abs() < 0.01, "{area}");
    }
}
