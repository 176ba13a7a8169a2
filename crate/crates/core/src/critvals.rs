//! Critical values by simulating the limiting processes of the detectors.
//!
//! A standard Brownian motion `W` is discretised on `[0, T]` with Gaussian
//! increments of variance `1/steps_per_unit`. Under the null hypothesis the
//! normalised detectors converge to
//!
//! - RE, OLS-CUSUM, OLS-CUSUM-SQ: `X(t) = W(t) - t W(1)` on `[1, T]`;
//! - ME: `X(t) = W(t) - W(t-h) - h W(1)` on `[1, T]`;
//! - OLS-MOSUM: the same increment process on `[1+h, T]`.
//!
//! For boundaries linear in `lambda` the critical value is the `(1-alpha)`
//! quantile of `sup |X(t)| / b(t; 1)`. Replication `i` draws from its own
//! stream, so results do not depend on the thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::{B1Scale, Boundary, BoundaryKind, ClosedForm};
use crate::detectors::DetectorKind;
use crate::rng::replication_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSimConfig {
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_steps")]
    pub steps_per_unit: usize,
    pub horizon: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Window fraction for the ME/MOSUM processes.
    #[serde(default = "default_h")]
    pub h: f64,
    /// Add the probability of a crossing between grid points (Brownian-bridge
    /// interpolation) to [`crossing_probability`].
    #[serde(default)]
    pub continuity_correction: bool,
}

fn default_reps() -> usize {
    25_000
}
fn default_steps() -> usize {
    1000
}
fn default_h() -> f64 {
    0.5
}

impl BridgeSimConfig {
    pub fn new(horizon: f64, alpha: f64, seed: u64) -> Self {
        Self {
            replications: default_reps(),
            steps_per_unit: default_steps(),
            horizon,
            alpha,
            seed,
            h: default_h(),
            continuity_correction: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be >= 1".into()));
        }
        if self.steps_per_unit < 10 {
            return Err(Error::InvalidInput("steps_per_unit must be >= 10".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.horizon >= 1.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon T must be >= 1, got {}", self.horizon)));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::InvalidInput(format!("h must lie in (0, 1], got {}", self.h)));
        }
        Ok(())
    }
}

/// Limiting process family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Re,
    Cusum,
    Me,
    Mosum,
}

impl From<DetectorKind> for ProcessKind {
    fn from(k: DetectorKind) -> Self {
        match k {
            DetectorKind::Re => Self::Re,
            DetectorKind::Me => Self::Me,
            DetectorKind::OlsMosum => Self::Mosum,
            DetectorKind::OlsCusum | DetectorKind::OlsCusumSq => Self::Cusum,
        }
    }
}

/// One discretised path of the limiting process on `[1, T]`.
struct LimitPath {
    times: Vec<f64>,
    values: Vec<f64>,
    /// Conditional variance of the process over one grid step.
    step_var: f64,
}

fn simulate_limit(cfg: &BridgeSimConfig, process: ProcessKind, horizon: f64, index: u64) -> LimitPath {
    let spu = cfg.steps_per_unit;
    let m = (horizon * spu as f64).round() as usize;
    let dt = 1.0 / spu as f64;
    let sd = dt.sqrt();
    let mut rng = replication_rng(cfg.seed, index);
    let mut w = Vec::with_capacity(m + 1);
    w.push(0.0);
    let mut acc = 0.0;
    for _ in 0..m {
        let z: f64 = rng.sample(StandardNormal);
        acc += sd * z;
        w.push(acc);
    }
    let w1 = w[spu];
    let hs = (cfg.h * spu as f64).round() as usize;
    let (start, step_var) = match process {
        ProcessKind::Re | ProcessKind::Cusum => (spu, dt),
        ProcessKind::Me => (spu, 2.0 * dt),
        ProcessKind::Mosum => (spu + hs, 2.0 * dt),
    };
    let mut times = Vec::with_capacity(m + 1 - start.min(m));
    let mut values = Vec::with_capacity(times.capacity());
    for (j, &wj) in w.iter().enumerate().skip(start) {
        let t = j as f64 * dt;
        let x = match process {
            ProcessKind::Re | ProcessKind::Cusum => wj - t * w1,
            ProcessKind::Me | ProcessKind::Mosum => wj - w[j - hs] - cfg.h * w1,
        };
        times.push(t);
        values.push(x);
    }
    LimitPath { times, values, step_var }
}

/// Per-path statistic used to rank paths against a boundary family.
fn path_statistic(boundary: &Boundary, t: f64, x: f64) -> Option<f64> {
    if boundary.kind == BoundaryKind::B1 {
        // crossing iff x^2 / (t(t-1)) - ln(t/(t-1)) >= c
        if t <= 1.0 {
            return None;
        }
        return Some(x * x / (t * (t - 1.0)) - (t / (t - 1.0)).ln());
    }
    let b = boundary.on_clock(t).ok()?;
    (b > 0.0 && b.is_finite()).then(|| x.abs() / b)
}

fn unit_boundary(boundary: &Boundary) -> Result<Boundary> {
    boundary.with_lambda(1.0)?.historical_size(boundary.n.max(1))
}

fn order_statistic(mut sample: Vec<f64>, alpha: f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let r = sample.len();
    let idx = ((1.0 - alpha) * r as f64).ceil() as usize;
    sample[idx.clamp(1, r) - 1]
}

/// Per-path `sup_t stat(t, X(t))` for several horizons at once (each a prefix
/// of the path on `[1, max horizon]`). Points with no statistic are skipped;
/// an empty prefix yields 0.
pub fn sup_statistics(
    cfg: &BridgeSimConfig,
    process: ProcessKind,
    horizons: &[f64],
    stat: &(dyn Fn(f64, f64) -> Option<f64> + Sync),
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let max_t = horizons.iter().copied().fold(cfg.horizon, f64::max);
    let reps = cfg.replications;
    Ok((0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_limit(cfg, process, max_t, i);
            let mut out = vec![0.0f64; horizons.len()];
            let mut sup = f64::NEG_INFINITY;
            let mut order: Vec<usize> = (0..horizons.len()).collect();
            order.sort_by(|&a, &b| horizons[a].total_cmp(&horizons[b]));
            let mut next = 0;
            for (&t, &x) in path.times.iter().zip(&path.values) {
                while next < order.len() && t > horizons[order[next]] + 1e-12 {
                    out[order[next]] = sup.max(0.0);
                    next += 1;
                }
                if let Some(v) = stat(t, x) {
                    sup = sup.max(v);
                }
            }
            for &o in &order[next..] {
                out[o] = if sup == f64::NEG_INFINITY { 0.0 } else { sup };
            }
            out
        })
        .collect())
}

/// Critical value `lambda` making the crossing probability of `boundary`'s
/// shape equal to `alpha` (the `lambda` field of `boundary` is ignored).
/// For `b1` the quantile is the constant under the root, converted per [`B1Scale`].
pub fn simulate_lambda(cfg: &BridgeSimConfig, boundary: &Boundary, process: ProcessKind) -> Result<f64> {
    let unit = unit_boundary(boundary)?;
    let sups = sup_statistics(cfg, process, &[cfg.horizon], &|t, x| path_statistic(&unit, t, x))?;
    let q = order_statistic(sups.into_iter().map(|v| v[0]).collect(), cfg.alpha);
    Ok(match (boundary.kind, boundary.b1_scale) {
        (BoundaryKind::B1, B1Scale::Plain) => q.max(0.0).sqrt(),
        _ => q,
    })
}

/// Critical values for several horizons and levels from one set of paths:
/// `out[a][h]` for `alphas[a]` and `horizons[h]`.
pub fn lambda_table(
    cfg: &BridgeSimConfig,
    boundary: &Boundary,
    process: ProcessKind,
    alphas: &[f64],
    horizons: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let unit = unit_boundary(boundary)?;
    let sups = sup_statistics(cfg, process, horizons, &|t, x| path_statistic(&unit, t, x))?;
    Ok(alphas
        .iter()
        .map(|&a| {
            (0..horizons.len())
                .map(|h| order_statistic(sups.iter().map(|s| s[h]).collect(), a))
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEstimate {
    pub probability: f64,
    pub std_error: f64,
}

fn bernoulli_mean(values: &[f64]) -> CrossingEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    CrossingEstimate {
        probability: mean,
        std_error: (var / n).sqrt(),
    }
}

/// Probability that a Brownian bridge over one step of variance `v` reaches a
/// level whose distance from the endpoints is `d0`, `d1` (both positive).
fn bridge_hit(d0: f64, d1: f64, v: f64) -> f64 {
    (-2.0 * d0 * d1 / v).exp()
}

/// Per-path crossing indicator (or crossing probability with the correction)
/// for `|x_j| >= b_j` on a grid.
fn path_crossing(bounds: &[f64], xs: &[f64], step_var: f64, correct: bool) -> f64 {
    let mut survive = 1.0;
    for j in 0..xs.len() {
        let b = bounds[j];
        if b.is_finite() && xs[j].abs() >= b {
            return 1.0;
        }
        if correct && j > 0 && b.is_finite() && bounds[j - 1].is_finite() {
            let (b0, x0, x1) = (bounds[j - 1], xs[j - 1], xs[j]);
            let up = bridge_hit(b0 - x0, b - x1, step_var);
            let down = bridge_hit(b0 + x0, b + x1, step_var);
            survive *= (1.0 - up - down).max(0.0);
        }
    }
    1.0 - survive
}

/// Monte Carlo estimate of `P(|X(t)| >= b(t) for some t in [1, T])`.
pub fn crossing_probability(cfg: &BridgeSimConfig, boundary: &Boundary, process: ProcessKind) -> Result<CrossingEstimate> {
    cfg.validate()?;
    let hits: Vec<f64> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_limit(cfg, process, cfg.horizon, i);
            let bounds: Vec<f64> = path
                .times
                .iter()
                .map(|&t| boundary.on_clock(t).unwrap_or(f64::INFINITY))
                .collect();
            path_crossing(&bounds, &path.values, path.step_var, cfg.continuity_correction)
        })
        .collect();
    Ok(bernoulli_mean(&hits))
}

/// Simulation check of [`crate::boundaries::closed_form_crossing`]. Standard
/// Brownian motion on the infinite horizon is represented through a Brownian
/// bridge `B` on `[0, 1]` via `W(t) = (1 + t) B(t / (1 + t))`; the boundary
/// maps to `|B(u)| >= b(u/(1-u)) (1 - u)`.
pub fn closed_form_crossing_mc(cfg: &BridgeSimConfig, form: ClosedForm, lambda: f64) -> Result<CrossingEstimate> {
    cfg.validate()?;
    let spu = cfg.steps_per_unit;
    let l2 = lambda * lambda;
    let hits: Vec<f64> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|i| {
            let dt = 1.0 / spu as f64;
            let mut rng = replication_rng(cfg.seed, i);
            let mut w = Vec::with_capacity(spu + 1);
            w.push(0.0);
            let mut acc = 0.0;
            for _ in 0..spu {
                let z: f64 = rng.sample(StandardNormal);
                acc += dt.sqrt() * z;
                w.push(acc);
            }
            let w1 = w[spu];
            let (mut bounds, mut xs) = (Vec::with_capacity(spu), Vec::with_capacity(spu));
            for (j, &wj) in w.iter().enumerate().take(spu).skip(1) {
                let u = j as f64 * dt;
                let b = match form {
                    ClosedForm::SqrtT1Log => ((1.0 - u) * (l2 - (1.0 - u).ln())).sqrt(),
                    ClosedForm::SqrtTLog => {
                        if u < 0.5 {
                            f64::INFINITY
                        } else {
                            (u * (1.0 - u) * (l2 + (u / (1.0 - u)).ln())).sqrt()
                        }
                    }
                };
                bounds.push(b);
                xs.push(wj - u * w1);
            }
            path_crossing(&bounds, &xs, dt, cfg.continuity_correction)
        })
        .collect();
    Ok(bernoulli_mean(&hits))
}

/// Empirical distribution of `sup_{t in [1,T]} |X(t)|`, e.g. as the limit law of `sup |G_n|`.
pub fn sup_abs_sample(cfg: &BridgeSimConfig, process: ProcessKind) -> Result<Vec<f64>> {
    let s = sup_statistics(cfg, process, &[cfg.horizon], &|_, x| Some(x.abs()))?;
    Ok(s.into_iter().map(|v| v[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundaries::closed_form_crossing;

    fn cfg(reps: usize, t: f64, alpha: f64, seed: u64) -> BridgeSimConfig {
        BridgeSimConfig {
            replications: reps,
            steps_per_unit: 500,
            ..BridgeSimConfig::new(t, alpha, seed)
        }
    }

    fn b3() -> Boundary {
        Boundary::with_default_lambda(BoundaryKind::B3)
    }

    #[test]
    fn b3_t2_close_to_table() {
        let l = simulate_lambda(&cfg(6000, 2.0, 0.05, 1), &b3(), ProcessKind::Re).unwrap();
        assert!((l - 1.577).abs() < 0.05, "{l}");
    }

    #[test]
    fn median_is_quantile_at_half() {
        let c = cfg(999, 2.0, 0.5, 2);
        let l = simulate_lambda(&c, &b3(), ProcessKind::Re).unwrap();
        let unit = b3().with_lambda(1.0).unwrap();
        let mut s: Vec<f64> = sup_statistics(&c, ProcessKind::Re, &[2.0], &|t, x| path_statistic(&unit, t, x))
            .unwrap()
            .into_iter()
            .map(|v| v[0])
            .collect();
        s.sort_by(f64::total_cmp);
        assert_eq!(l, s[499]);
    }

    #[test]
    fn monotone_in_alpha() {
        let t = lambda_table(&cfg(3000, 3.0, 0.05, 3), &b3(), ProcessKind::Re, &[0.01, 0.05, 0.10], &[3.0]).unwrap();
        assert!(t[0][0] > t[1][0] && t[1][0] > t[2][0]);
    }

    #[test]
    fn table_matches_single_horizon_runs() {
        let c = cfg(500, 4.0, 0.05, 4);
        let table = lambda_table(&c, &b3(), ProcessKind::Re, &[0.05], &[2.0, 4.0]).unwrap();
        let single = simulate_lambda(&BridgeSimConfig { horizon: 4.0, ..c }, &b3(), ProcessKind::Re).unwrap();
        assert_eq!(table[0][1], single);
        assert!(table[0][0] <= table[0][1]);
    }

    #[test]
    fn self_consistent_crossing_rate() {
        let l = simulate_lambda(&cfg(4000, 2.0, 0.05, 5), &b3(), ProcessKind::Cusum).unwrap();
        let bd = b3().with_lambda(l).unwrap();
        let est = crossing_probability(&cfg(4000, 2.0, 0.05, 6), &bd, ProcessKind::Cusum).unwrap();
        assert!((est.probability - 0.05).abs() < 2.0 * est.std_error + 0.01, "{est:?}");
        let huge = crossing_probability(&cfg(500, 2.0, 0.05, 7), &b3().with_lambda(50.0).unwrap(), ProcessKind::Cusum).unwrap();
        assert_eq!(huge.probability, 0.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let c = cfg(300, 2.0, 0.1, 8);
        let a = simulate_lambda(&c, &b3(), ProcessKind::Re).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_lambda(&c, &b3(), ProcessKind::Re).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn closed_form_sign_confirmed() {
        let c = BridgeSimConfig {
            continuity_correction: true,
            ..cfg(8000, 1.0, 0.05, 9)
        };
        let est = closed_form_crossing_mc(&c, ClosedForm::SqrtT1Log, 2.4477).unwrap();
        let exact = closed_form_crossing(ClosedForm::SqrtT1Log, 2.4477);
        assert!((est.probability - exact).abs() < 3.0 * est.std_error + 0.005, "{est:?} vs {exact}");
    }

    #[test]
    fn b1_quantile_is_squared_constant() {
        let c = cfg(3000, 2.0, 0.05, 10);
        let sq = simulate_lambda(&c, &Boundary::with_default_lambda(BoundaryKind::B1), ProcessKind::Cusum).unwrap();
        let mut plain = Boundary::with_default_lambda(BoundaryKind::B1);
        plain.b1_scale = B1Scale::Plain;
        let pl = simulate_lambda(&c, &plain, ProcessKind::Cusum).unwrap();
        assert!((pl * pl - sq).abs() < 1e-9);
    }

    #[test]
    fn mosum_paths_start_after_window() {
        let c = cfg(5, 2.0, 0.05, 11);
        let p = simulate_limit(&c, ProcessKind::Mosum, 2.0, 0);
        assert!((p.times[0] - 1.5).abs() < 1e-12);
        let r = simulate_limit(&c, ProcessKind::Re, 2.0, 0);
        assert_eq!(r.values[0], 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(BridgeSimConfig { steps_per_unit: 5, ..BridgeSimConfig::new(2.0, 0.05, 0) }.validate().is_err());
        assert!(BridgeSimConfig::new(2.0, 1.0, 0).validate().is_err());
        assert!(BridgeSimConfig { replications: 0, ..BridgeSimConfig::new(2.0, 0.05, 0) }.validate().is_err());
    }
}
