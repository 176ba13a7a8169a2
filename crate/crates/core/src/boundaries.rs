//! Boundary functions for sequential monitoring.
//!
//! All boundaries except `b6` are written on the scaled monitoring clock
//! `t = (n + k) / n`, `t >= 1`. `b6` is defined on raw elapsed time `k`
//! and carries its own `sqrt(n)` factor; [`Boundary::on_clock`] converts
//! every kind to the units of a `1/(sigma sqrt(n))`-normalised detector on
//! the scaled clock.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::{Error, Result};

/// Golden-section exponent as printed for `b8`/`b9`. Note `1/phi` is 0.618.
pub const PHI_INV: f64 = 1.618;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    B1,
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    B8,
    B9,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 9] = [
        Self::B1,
        Self::B2,
        Self::B3,
        Self::B4,
        Self::B5,
        Self::B6,
        Self::B7,
        Self::B8,
        Self::B9,
    ];

    /// Critical value at the 5% level. For `b1` this is the squared constant
    /// inside the root (see [`B1Scale`]). `b7`-`b9` have no published value
    /// and default to the `b3` constant.
    pub fn default_lambda(self) -> f64 {
        match self {
            Self::B1 => 7.78,
            Self::B2 => 3.15,
            Self::B3 => 1.58,
            Self::B4 => 2.49,
            Self::B5 => 6.043,
            Self::B6 => 2.386,
            Self::B7 | Self::B8 | Self::B9 => 1.58,
        }
    }

    /// Whether `eval` is proportional to `lambda`.
    pub fn is_linear_in_lambda(self) -> bool {
        !matches!(self, Self::B1)
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = Self::ALL.iter().position(|k| k == self).unwrap() + 1;
        write!(f, "b{i}")
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        s.strip_prefix('b')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|d| (1..=9).contains(d))
            .map(|d| Self::ALL[d - 1])
            .ok_or_else(|| Error::InvalidInput(format!("unknown boundary {s:?} (expected b1..b9)")))
    }
}

/// How the `b1` critical value enters `sqrt(t(t-1)[c + log(t/(t-1))])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum B1Scale {
    /// `c = lambda` (the tabulated 7.78 is already squared).
    #[default]
    Squared,
    /// `c = lambda^2`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub kind: BoundaryKind,
    pub lambda: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_phi_inv")]
    pub phi_inv: f64,
    /// Historical sample size (used by `b6`).
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub b1_scale: B1Scale,
}

fn default_gamma() -> f64 {
    0.25
}
fn default_phi_inv() -> f64 {
    PHI_INV
}
fn default_n() -> usize {
    1
}

impl Boundary {
    pub fn new(kind: BoundaryKind, lambda: f64) -> Result<Self> {
        Self {
            kind,
            lambda,
            gamma: default_gamma(),
            phi_inv: PHI_INV,
            n: 1,
            b1_scale: B1Scale::default(),
        }
        .validated()
    }

    pub fn with_default_lambda(kind: BoundaryKind) -> Self {
        Self::new(kind, kind.default_lambda()).expect("defaults are valid")
    }

    pub fn gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validated()
    }

    pub fn historical_size(mut self, n: usize) -> Result<Self> {
        self.n = n;
        self.validated()
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "boundary lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.kind == BoundaryKind::B6 && !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "b6 gamma must lie in (0, 0.5], got {}",
                self.gamma
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("boundary n must be >= 1".into()));
        }
        if !(self.phi_inv > 0.0) {
            return Err(Error::InvalidInput("phi_inv must be positive".into()));
        }
        Ok(self)
    }

    fn b1_constant(&self) -> f64 {
        match self.b1_scale {
            B1Scale::Squared => self.lambda,
            B1Scale::Plain => self.lambda * self.lambda,
        }
    }

    fn domain_err(&self, t: f64) -> Error {
        Error::Domain {
            boundary: self.kind.to_string(),
            t,
        }
    }

    /// `b(t)` as written. For `b6`, `t` is raw elapsed time (`t >= 0`);
    /// for all other kinds it is the scaled clock.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let l = self.lambda;
        let pi = self.phi_inv;
        if !t.is_finite() {
            return Err(self.domain_err(t));
        }
        let v = match self.kind {
            BoundaryKind::B1 => {
                if t < 1.0 {
                    return Err(self.domain_err(t));
                }
                if t == 1.0 {
                    0.0
                } else {
                    (t * (t - 1.0) * (self.b1_constant() + (t / (t - 1.0)).ln())).sqrt()
                }
            }
            BoundaryKind::B2 => {
                if t < 1.0 {
                    return Err(self.domain_err(t));
                }
                l * (t * (t - 1.0)).sqrt()
            }
            BoundaryKind::B3 => l * t,
            BoundaryKind::B4 => l * t * t,
            BoundaryKind::B5 => l * (t * t - t + 0.1),
            BoundaryKind::B6 => {
                if t < 0.0 {
                    return Err(self.domain_err(t));
                }
                let n = self.n as f64;
                l * n.sqrt() * (1.0 + t / n) * (n / (t + n)).powf(self.gamma)
            }
            BoundaryKind::B7 => {
                if t < 0.5 {
                    return Err(self.domain_err(t));
                }
                l * (t * (t - 0.5)).powf(0.25)
            }
            BoundaryKind::B8 => {
                if t <= pi {
                    return Err(self.domain_err(t));
                }
                l * (t * (t - pi)).powf(pi)
            }
            BoundaryKind::B9 => {
                if t <= pi {
                    return Err(self.domain_err(t));
                }
                l * (t / (t - pi)).powf(pi)
            }
        };
        Ok(v)
    }

    /// Boundary in normalised-detector units at scaled clock `t = 1 + k/n`.
    /// For `b6` this is `b6(n (t - 1)) / sqrt(n)`.
    pub fn on_clock(&self, t: f64) -> Result<f64> {
        match self.kind {
            BoundaryKind::B6 => {
                let n = self.n as f64;
                Ok(self.eval(n * (t - 1.0))? / n.sqrt())
            }
            _ => self.eval(t),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(lambda={})", self.kind, self.lambda)
    }
}

/// Time variable in which the admissibility conditions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckClock {
    /// The scaled clock `t` itself.
    Scaled,
    /// Elapsed monitoring time `s = t - 1`, where the limiting process starts at zero.
    Elapsed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub pass: bool,
    /// First grid point (in the check clock) violating a monotonicity condition.
    pub first_violation: Option<f64>,
    /// Truncated integral value for the integrability conditions.
    pub integral: Option<f64>,
}

/// Verdicts for the four admissibility conditions:
/// (i) `s^{-1/2} b` non-decreasing for large `s`, (ii) non-increasing for
/// small `s`, (iii) `int_{s0}^inf s^{-3/2} b exp(-b^2/2s) ds < inf`,
/// (iv) the same integral on `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobbinsReport {
    pub clock: CheckClock,
    pub conditions: [ConditionVerdict; 4],
}

impl RobbinsReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }
}

/// Numerically checks the admissibility conditions on `grid` (scaled-clock
/// points, increasing). The "small" region is the first decade above the
/// smallest positive grid point and the "large" region the last decade below
/// the largest. Integrals are truncated at geometrically shrinking cut-offs and
/// declared finite when the increments shrink by at least half per step.
pub fn robbins_check(boundary: &Boundary, grid: &[f64], t0: f64, clock: CheckClock) -> RobbinsReport {
    let to_s = |t: f64| match clock {
        CheckClock::Scaled => t,
        CheckClock::Elapsed => t - 1.0,
    };
    let from_s = |s: f64| match clock {
        CheckClock::Scaled => s,
        CheckClock::Elapsed => s + 1.0,
    };
    let b_of_s = |s: f64| boundary.on_clock(from_s(s)).ok().filter(|v| v.is_finite() && *v > 0.0);
    let ratio = |s: f64| b_of_s(s).map(|b| b / s.sqrt());

    let pts: Vec<f64> = grid.iter().copied().map(to_s).filter(|s| *s > 0.0).collect();
    let (s_min, s_max_grid) = (pts.first().copied().unwrap_or(1.0), pts.last().copied().unwrap_or(1.0));
    let small: Vec<f64> = pts.iter().copied().filter(|&s| s <= 10.0 * s_min).collect();
    let large: Vec<f64> = pts.iter().copied().filter(|&s| s >= s_max_grid / 10.0).collect();
    let monotone = |seg: &[f64], increasing: bool| -> ConditionVerdict {
        let mut prev: Option<f64> = None;
        for &s in seg {
            let Some(r) = ratio(s) else {
                return ConditionVerdict { pass: false, first_violation: Some(s), integral: None };
            };
            if let Some(p) = prev {
                let tol = 1e-12 * p.abs().max(r.abs());
                let bad = if increasing { r < p - tol } else { r > p + tol };
                if bad {
                    return ConditionVerdict { pass: false, first_violation: Some(s), integral: None };
                }
            }
            prev = Some(r);
        }
        ConditionVerdict { pass: !seg.is_empty(), first_violation: None, integral: None }
    };
    let upper = monotone(&large, true);
    let lower = monotone(&small, false);

    let integrand = |s: f64| -> Option<f64> {
        let b = b_of_s(s)?;
        Some(s.powf(-1.5) * b * (-b * b / (2.0 * s)).exp())
    };
    let s0 = to_s(t0).max(f64::MIN_POSITIVE);
    let s_max = pts.last().copied().unwrap_or(1.0).max(s0 * 2.0);
    let tail = {
        let parts: Option<Vec<f64>> = [s_max, 10.0 * s_max, 100.0 * s_max]
            .iter()
            .map(|&hi| log_quadrature(&integrand, s0, hi))
            .collect();
        integrability_verdict(parts)
    };
    let head = {
        let parts: Option<Vec<f64>> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&lo| log_quadrature(&integrand, lo, 1.0))
            .collect();
        integrability_verdict(parts)
    };
    RobbinsReport {
        clock,
        conditions: [upper, lower, tail, head],
    }
}

fn integrability_verdict(parts: Option<Vec<f64>>) -> ConditionVerdict {
    match parts {
        Some(v) if v.iter().all(|x| x.is_finite()) => {
            let last = v[v.len() - 1];
            let d1 = (v[1] - v[0]).abs();
            let d2 = (v[2] - v[1]).abs();
            let pass = d2 <= 0.5 * d1 || d2 <= 1e-12 * last.abs().max(1e-300);
            ConditionVerdict { pass, first_violation: None, integral: Some(last) }
        }
        _ => ConditionVerdict { pass: false, first_violation: None, integral: None },
    }
}

/// Composite Simpson on a logarithmic grid over `[lo, hi]`.
fn log_quadrature(f: &impl Fn(f64) -> Option<f64>, lo: f64, hi: f64) -> Option<f64> {
    if !(hi > lo) || lo <= 0.0 {
        return Some(0.0);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let m = 4000usize;
    let h = (b - a) / m as f64;
    let mut acc = 0.0;
    for i in 0..=m {
        let u = a + i as f64 * h;
        let s = u.exp();
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f(s)? * s;
    }
    Some(acc * h / 3.0)
}

/// Boundaries with closed-form crossing probabilities for standard Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `P{|W(t)| >= sqrt(t[l^2 + ln t]), t >= 1}`.
    SqrtTLog,
    /// `P{|W(t)| >= sqrt((t+1)[l^2 + ln(t+1)]), t >= 0}`.
    SqrtT1Log,
}

pub fn closed_form_crossing(form: ClosedForm, lambda: f64) -> f64 {
    match form {
        ClosedForm::SqrtTLog => {
            let nrm = Normal::standard();
            2.0 * (1.0 - nrm.cdf(lambda) + lambda * nrm.pdf(lambda))
        }
        ClosedForm::SqrtT1Log => (-lambda * lambda / 2.0).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(kind: BoundaryKind, l: f64) -> Boundary {
        Boundary::new(kind, l).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert!((b(BoundaryKind::B3, 1.577).eval(2.0).unwrap() - 3.154).abs() < 1e-12);
        assert_eq!(b(BoundaryKind::B2, 3.15).eval(1.0).unwrap(), 0.0);
        assert_eq!(b(BoundaryKind::B1, 7.78).eval(1.0).unwrap(), 0.0);
        let b6 = |g: f64| {
            Boundary::new(BoundaryKind::B6, 2.386)
                .unwrap()
                .gamma(g)
                .unwrap()
                .historical_size(100)
                .unwrap()
        };
        for t in [1.0, 10.0, 100.0, 500.0] {
            let mut prev = f64::INFINITY;
            for g in [0.05, 0.15, 0.25, 0.35, 0.5] {
                let v = b6(g).eval(t).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(b(BoundaryKind::B8, 1.0).eval(1.5).is_err());
        assert!(b(BoundaryKind::B9, 1.0).eval(PHI_INV).is_err());
        assert!(b(BoundaryKind::B1, 1.0).eval(0.9).is_err());
        assert!(b(BoundaryKind::B8, 1.0).eval(1.7).unwrap() > 0.0);
    }

    #[test]
    fn invariants_rejected() {
        assert!(Boundary::new(BoundaryKind::B3, 0.0).is_err());
        assert!(Boundary::new(BoundaryKind::B6, 1.0).unwrap().gamma(0.6).is_err());
        assert!(Boundary::new(BoundaryKind::B6, 1.0).unwrap().gamma(0.0).is_err());
    }

    #[test]
    fn linear_in_lambda_except_b1() {
        for kind in BoundaryKind::ALL.into_iter().filter(|k| k.is_linear_in_lambda()) {
            let one = Boundary::new(kind, 1.0).unwrap().historical_size(50).unwrap();
            let big = one.with_lambda(2.7).unwrap();
            for t in [1.7, 2.0, 3.5, 9.0] {
                let (a, c) = (one.eval(t).unwrap(), big.eval(t).unwrap());
                assert!((c - 2.7 * a).abs() <= 1e-12 * c.abs());
            }
        }
    }

    #[test]
    fn continuity_under_refinement() {
        for kind in BoundaryKind::ALL {
            let bd = Boundary::with_default_lambda(kind).historical_size(100).unwrap();
            for t in [1.7, 2.3, 4.0] {
                let base = bd.eval(t).unwrap();
                let mut prev = f64::INFINITY;
                for d in [1e-2, 1e-4, 1e-6] {
                    let diff = (bd.eval(t + d).unwrap() - base).abs();
                    assert!(diff <= prev);
                    prev = diff;
                }
                assert!(prev < 1e-4 * base.max(1.0));
            }
        }
    }

    #[test]
    fn b6_increasing_in_n() {
        // d/dn log b6 > 0 iff t < n / (1 - 2 gamma): t <= 2n for gamma = 0.25
        for t in [1.0, 10.0, 20.0] {
            let mut prev = 0.0;
            for n in [10, 50, 100, 500] {
                let v = Boundary::new(BoundaryKind::B6, 2.386).unwrap().historical_size(n).unwrap().eval(t).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn b6_on_clock_uses_elapsed_time() {
        let bd = Boundary::new(BoundaryKind::B6, 2.0).unwrap().historical_size(100).unwrap();
        let v = bd.on_clock(1.5).unwrap();
        let direct = bd.eval(50.0).unwrap() / 10.0;
        assert!((v - direct).abs() < 1e-12);
        assert!((bd.on_clock(1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms() {
        let p = closed_form_crossing(ClosedForm::SqrtT1Log, 2.4477);
        assert!((p - 0.05).abs() < 1e-4);
        assert!(closed_form_crossing(ClosedForm::SqrtT1Log, 40.0) < 1e-300);
        assert!(closed_form_crossing(ClosedForm::SqrtTLog, 40.0) < 1e-300);
        assert!((closed_form_crossing(ClosedForm::SqrtTLog, 1e-12) - 1.0).abs() < 1e-9);
        // the b1 constant 7.78 is a squared 5% critical value
        assert!((closed_form_crossing(ClosedForm::SqrtTLog, 7.78f64.sqrt()) - 0.05).abs() < 2e-3);
    }

    fn grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
        (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn robbins_b1_passes_on_elapsed_clock() {
        let r = robbins_check(&b(BoundaryKind::B1, 7.78), &grid(1.01, 100.0, 2000), 1.01, CheckClock::Elapsed);
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn robbins_b4_fails_small_time_condition() {
        let r = robbins_check(&b(BoundaryKind::B4, 2.49), &grid(1.01, 100.0, 2000), 1.01, CheckClock::Scaled);
        assert!(!r.conditions[1].pass);
        assert!(r.conditions[1].first_violation.is_some());
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("b3".parse::<BoundaryKind>().unwrap(), BoundaryKind::B3);
        assert_eq!("B9".parse::<BoundaryKind>().unwrap(), BoundaryKind::B9);
        assert!("b10".parse::<BoundaryKind>().is_err());
        assert_eq!(BoundaryKind::B7.to_string(), "b7");
    }
}
