//! Gaussian quasi-maximum likelihood for GARCH(1,1) and AR(1)-GARCH(1,1).
//!
//! Mean equation `y_t = mu (+ rho y_{t-1}) + e_t`, variance recursion
//! `h_t = omega + alpha e_{t-1}^2 + beta h_{t-1}`. Mean and variance
//! parameters are estimated jointly by Nelder-Mead over an unconstrained
//! reparameterisation that keeps `alpha + beta < 1` at every iterate.
//! `h_1` is fixed at the sample variance of the demeaned innovations at the
//! least-squares starting point. Standard errors are the sandwich
//! `H^{-1} J H^{-1}` from a finite-difference Hessian and per-observation scores.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linreg::{ar1_design, ols_fit};
use crate::matrix::inverse_spd;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::timeseries::TimeSeries;
use crate::{Error, Result};

/// Shortest series accepted by [`garch_fit`].
pub const MIN_LEN: usize = 50;

/// `alpha + beta` above this is flagged as a near-integrated solution.
pub const PERSISTENCE_WARN: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarchParams {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GarchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.omega > 0.0
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta < 1.0
            && self.rho.is_none_or(|r| r.abs() < 1.0)
            && self.mu.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "GARCH parameters violate omega > 0, alpha, beta >= 0, alpha + beta < 1: {self:?}"
            )))
        }
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }

    fn to_vec(self) -> Vec<f64> {
        let mut v = vec![self.mu];
        v.extend(self.rho);
        v.extend([self.omega, self.alpha, self.beta]);
        v
    }

    fn from_vec(v: &[f64], with_ar: bool) -> Self {
        let o = with_ar as usize;
        Self {
            mu: v[0],
            rho: with_ar.then(|| v[1]),
            omega: v[1 + o],
            alpha: v[2 + o],
            beta: v[3 + o],
        }
    }
}

/// Robust standard errors, one per parameter (NaN when the Hessian is not invertible).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GarchStdErrors {
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub loglik: f64,
    /// Log-likelihood at the optimiser's starting point.
    pub start_loglik: f64,
    pub std_residuals: Vec<f64>,
    pub cond_var: Vec<f64>,
    pub h1: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// `alpha + beta > 0.999`.
    pub near_integrated: bool,
    pub robust_se: GarchStdErrors,
}

/// Mean-equation innovations. With an AR term the first observation is consumed as a lag.
pub fn innovations(values: &[f64], mu: f64, rho: Option<f64>) -> Vec<f64> {
    match rho {
        None => values.iter().map(|y| y - mu).collect(),
        Some(r) => values.windows(2).map(|w| w[1] - mu - r * w[0]).collect(),
    }
}

/// Runs the variance recursion from `h1`; returns `(innovations, conditional variances)`.
pub fn filter(values: &[f64], params: &GarchParams, h1: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let e = innovations(values, params.mu, params.rho);
    let h = variance_path(&e, params.omega, params.alpha, params.beta, h1).ok_or_else(|| {
        Error::DegenerateVariance("conditional variance is not positive and finite".into())
    })?;
    Ok((e, h))
}

fn variance_path(e: &[f64], omega: f64, alpha: f64, beta: f64, h1: f64) -> Option<Vec<f64>> {
    let mut h = Vec::with_capacity(e.len());
    let mut prev = h1;
    for (t, _) in e.iter().enumerate() {
        let cur = if t == 0 {
            h1
        } else {
            omega + alpha * e[t - 1] * e[t - 1] + beta * prev
        };
        if !(cur > 0.0 && cur.is_finite()) {
            return None;
        }
        h.push(cur);
        prev = cur;
    }
    Some(h)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-observation Gaussian log-likelihood contributions.
fn contributions(values: &[f64], theta: &[f64], with_ar: bool, h1: f64) -> Option<Vec<f64>> {
    let p = GarchParams::from_vec(theta, with_ar);
    let e = innovations(values, p.mu, p.rho);
    let h = variance_path(&e, p.omega, p.alpha, p.beta, h1)?;
    Some(
        e.iter()
            .zip(&h)
            .map(|(e, h)| -0.5 * (LN_2PI + h.ln() + e * e / h))
            .collect(),
    )
}

fn loglik(values: &[f64], theta: &[f64], with_ar: bool, h1: f64) -> f64 {
    contributions(values, theta, with_ar, h1).map_or(f64::NEG_INFINITY, |c| c.iter().sum())
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps the unconstrained search vector `(mu, [rho], a, b, c)` to `(mu, [rho], omega, alpha, beta)`.
fn to_natural(z: &[f64], with_ar: bool) -> Vec<f64> {
    let o = with_ar as usize;
    let s = logistic(z[3 + o]);
    let w = logistic(z[2 + o]);
    let mut v = z[..1 + o].to_vec();
    v.extend([z[1 + o].exp(), s * w, s * (1.0 - w)]);
    v
}

fn to_search(p: &GarchParams) -> Vec<f64> {
    let s = p.alpha + p.beta;
    let mut v = vec![p.mu];
    v.extend(p.rho);
    v.extend([p.omega.ln(), logit(p.alpha / s), logit(s)]);
    v
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// Estimates the model on `series`; `with_ar` adds the AR(1) mean term.
pub fn garch_fit(series: &TimeSeries, with_ar: bool) -> Result<GarchFit> {
    garch_fit_with(series, with_ar, &NelderMeadOptions::default())
}

pub fn garch_fit_with(series: &TimeSeries, with_ar: bool, opts: &NelderMeadOptions) -> Result<GarchFit> {
    let raw = series.values();
    if raw.len() < MIN_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_LEN,
            available: raw.len(),
        });
    }
    let scale = sample_variance(raw).sqrt();
    if !(scale > 0.0) {
        return Err(Error::DegenerateVariance("series has zero variance".into()));
    }
    // Optimise on the unit-variance series; mu, omega map back by scale, scale^2.
    let values: Vec<f64> = raw.iter().map(|v| v / scale).collect();

    let (mu0, rho0) = if with_ar {
        let ts = TimeSeries::new(values.clone())?;
        let fit = ols_fit(&ar1_design(&ts, 0..values.len())?)?;
        let rho = fit.beta[1].clamp(-0.95, 0.95);
        (fit.beta[0], Some(rho))
    } else {
        (values.iter().sum::<f64>() / values.len() as f64, None)
    };
    let e0 = innovations(&values, mu0, rho0);
    let h1 = sample_variance(&e0);
    if !(h1 > 0.0) {
        return Err(Error::DegenerateVariance("innovations have zero variance".into()));
    }
    let start = GarchParams {
        mu: mu0,
        rho: rho0,
        omega: 0.05 * h1,
        alpha: 0.05,
        beta: 0.90,
    };

    let objective = |z: &[f64]| -loglik(&values, &to_natural(z, with_ar), with_ar, h1);
    let z0 = to_search(&start);
    let start_loglik = -objective(&z0);

    // Restart from the incumbent while budget remains; restarts guard against
    // premature simplex collapse.
    let mut best = nelder_mead(objective, &z0, opts);
    let mut evaluations = best.evals;
    for _ in 0..3 {
        if evaluations >= opts.max_evals {
            break;
        }
        let budget = NelderMeadOptions {
            max_evals: opts.max_evals - evaluations,
            step: 0.05,
            ..*opts
        };
        let next = nelder_mead(objective, &best.x, &budget);
        evaluations += next.evals;
        let improved = next.value < best.value - 1e-10;
        if next.value <= best.value {
            best = next;
        }
        if !improved && best.converged {
            break;
        }
    }

    let nat = GarchParams::from_vec(&to_natural(&best.x, with_ar), with_ar);
    let params = GarchParams {
        mu: nat.mu * scale,
        rho: nat.rho,
        omega: nat.omega * scale * scale,
        alpha: nat.alpha,
        beta: nat.beta,
    };
    let h1_raw = h1 * scale * scale;
    let (e, cond_var) = filter(raw, &params, h1_raw)?;
    let std_residuals = e.iter().zip(&cond_var).map(|(e, h)| e / h.sqrt()).collect();
    let loglik = -best.value - e.len() as f64 * scale.ln();
    let start_loglik = start_loglik - e.len() as f64 * scale.ln();
    let robust_se = sandwich_se(raw, &params, with_ar, h1_raw);

    Ok(GarchFit {
        params,
        loglik,
        start_loglik,
        std_residuals,
        cond_var,
        h1: h1_raw,
        converged: best.converged,
        evaluations,
        near_integrated: params.alpha + params.beta > PERSISTENCE_WARN,
        robust_se,
    })
}

fn sandwich_se(values: &[f64], params: &GarchParams, with_ar: bool, h1: f64) -> GarchStdErrors {
    let theta = params.to_vec();
    let k = theta.len();
    let steps: Vec<f64> = theta.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    // keep variance parameters positive at the perturbed points
    let steps: Vec<f64> = steps
        .iter()
        .enumerate()
        .map(|(i, &s)| if i + 3 >= k { s.min(0.5 * theta[i].abs().max(1e-8)) } else { s })
        .collect();
    let shifted = |moves: &[(usize, f64)]| {
        let mut t = theta.clone();
        for &(i, d) in moves {
            t[i] += d;
        }
        t
    };

    let nan = || GarchStdErrors {
        mu: f64::NAN,
        rho: with_ar.then_some(f64::NAN),
        omega: f64::NAN,
        alpha: f64::NAN,
        beta: f64::NAN,
    };

    let mut hess = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let (hi, hj) = (steps[i], steps[j]);
            let f = |a: f64, b: f64| loglik(values, &shifted(&[(i, a * hi), (j, b * hj)]), with_ar, h1);
            let v = (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }

    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let up = contributions(values, &shifted(&[(i, steps[i])]), with_ar, h1);
        let dn = contributions(values, &shifted(&[(i, -steps[i])]), with_ar, h1);
        let (Some(up), Some(dn)) = (up, dn) else {
            return nan();
        };
        scores.push(up.iter().zip(&dn).map(|(u, d)| (u - d) / (2.0 * steps[i])).collect());
    }
    let nobs = scores[0].len();
    let mut opg = DMatrix::<f64>::zeros(k, k);
    for t in 0..nobs {
        for a in 0..k {
            for b in 0..k {
                opg[(a, b)] += scores[a][t] * scores[b][t];
            }
        }
    }

    let neg_h = -hess;
    if neg_h.iter().any(|v| !v.is_finite()) {
        return nan();
    }
    let Ok(hinv) = inverse_spd(&neg_h) else {
        return nan();
    };
    let cov = &hinv * opg * &hinv;
    let se: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let o = with_ar as usize;
    GarchStdErrors {
        mu: se[0],
        rho: with_ar.then(|| se[1]),
        omega: se[1 + o],
        alpha: se[2 + o],
        beta: se[3 + o],
    }
}

/// Standardised residuals `e_t / sqrt(h_t)` as a series. Unconverged fits
/// are refused unless `allow_unconverged` is set.
pub fn standardized_residuals(fit: &GarchFit, allow_unconverged: bool) -> Result<TimeSeries> {
    if !fit.converged && !allow_unconverged {
        return Err(Error::InvalidInput(
            "GARCH fit did not converge; pass the override to use its residuals".into(),
        ));
    }
    TimeSeries::new(fit.std_residuals.clone())
}

/// Draws `n` observations after discarding `burn_in`, starting from the
/// unconditional mean and variance.
pub fn simulate<R: Rng + ?Sized>(params: &GarchParams, n: usize, burn_in: usize, rng: &mut R) -> Vec<f64> {
    let rho = params.rho.unwrap_or(0.0);
    let mut y_prev = params.mu / (1.0 - rho);
    let mut h = params.unconditional_variance();
    let mut e_prev = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + burn_in {
        if t > 0 {
            h = params.omega + params.alpha * e_prev * e_prev + params.beta * h;
        }
        let z: f64 = rng.sample(StandardNormal);
        let e = h.sqrt() * z;
        let y = params.mu + rho * y_prev + e;
        if t >= burn_in {
            out.push(y);
        }
        y_prev = y;
        e_prev = e;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replication_rng;

    fn truth() -> GarchParams {
        GarchParams {
            mu: 0.0,
            rho: None,
            omega: 0.05,
            alpha: 0.10,
            beta: 0.85,
        }
    }

    #[test]
    fn filter_inverts_generator() {
        let p = GarchParams {
            mu: 0.3,
            rho: Some(0.4),
            ..truth()
        };
        let mut rng = replication_rng(11, 0);
        let h1 = 0.7;
        let mut y = vec![0.5];
        let mut z = Vec::new();
        let (mut h, mut e_prev) = (h1, 0.0);
        for t in 0..500 {
            if t > 0 {
                h = p.omega + p.alpha * e_prev * e_prev + p.beta * h;
            }
            let zt: f64 = rng.sample(StandardNormal);
            let e = h.sqrt() * zt;
            y.push(p.mu + 0.4 * y[t] + e);
            z.push(zt);
            e_prev = e;
        }
        let (e, hs) = filter(&y, &p, h1).unwrap();
        for ((e, h), zt) in e.iter().zip(&hs).zip(&z) {
            assert!((e / h.sqrt() - zt).abs() < 1e-10);
        }
    }

    #[test]
    fn reparameterisation_round_trips() {
        let p = GarchParams {
            mu: 1.5,
            rho: Some(0.2),
            omega: 0.3,
            alpha: 0.12,
            beta: 0.8,
        };
        let back = GarchParams::from_vec(&to_natural(&to_search(&p), true), true);
        assert!((back.alpha - 0.12).abs() < 1e-12 && (back.beta - 0.8).abs() < 1e-12);
        assert!((back.omega - 0.3).abs() < 1e-12);
    }

    #[test]
    fn recovers_simulated_parameters() {
        let mut rng = replication_rng(3, 0);
        let y = simulate(&truth(), 5000, 500, &mut rng);
        let fit = garch_fit(&TimeSeries::new(y).unwrap(), false).unwrap();
        let p = fit.params;
        assert!(fit.loglik >= fit.start_loglik);
        assert!((p.alpha - 0.10).abs() < 3.0 * fit.robust_se.alpha, "{fit:?}");
        assert!((p.beta - 0.85).abs() < 3.0 * fit.robust_se.beta);
        assert!((p.omega - 0.05).abs() < 3.0 * fit.robust_se.omega);
        let (_, replay) = filter(TimeSeries::new(y_of(&fit)).unwrap().values(), &p, fit.h1).unwrap();
        for (a, b) in replay.iter().zip(&fit.cond_var) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(p.alpha + p.beta < 1.0);
    }

    // Reconstructs the input series from the fit for the replay check.
    fn y_of(fit: &GarchFit) -> Vec<f64> {
        fit.std_residuals
            .iter()
            .zip(&fit.cond_var)
            .map(|(z, h)| fit.params.mu + z * h.sqrt())
            .collect()
    }

    #[test]
    fn iid_data_gives_flat_variance() {
        let mut rng = replication_rng(5, 0);
        let y: Vec<f64> = (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = garch_fit(&TimeSeries::new(y.clone()).unwrap(), false).unwrap();
        let var = sample_variance(&y);
        assert!(fit.params.alpha.abs() < 2.0 * fit.robust_se.alpha.max(0.01), "{:?}", fit.params);
        assert!((fit.params.unconditional_variance() - var).abs() < 0.15 * var);
        let (lo, hi) = fit.cond_var.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &h| (a.min(h), b.max(h)));
        assert!(hi / lo < 1.5, "cond_var range {lo}..{hi}");
        let sv = sample_variance(&fit.std_residuals);
        assert!((0.9..=1.1).contains(&sv));
    }

    #[test]
    fn rejects_short_and_degenerate() {
        assert!(matches!(
            garch_fit(&TimeSeries::new(vec![1.0; 10]).unwrap(), false),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            garch_fit(&TimeSeries::new(vec![0.0; 100]).unwrap(), false),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = truth();
        p.alpha = 0.2;
        assert!(p.validate().is_err());
        assert!(truth().validate().is_ok());
    }
}
