//! Least-squares estimation for `y_t = x'_{t-1} beta + e_t`.
//!
//! Solves go through QR (full fits) or Cholesky on accumulated normal
//! equations (recursive and windowed fits); a reciprocal condition number
//! below 1e-12 on `X'X` is reported as [`Error::Singular`].

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::matrix::{inverse_spd, rcond_sym, solve_spd, symmetrize, RCOND_MIN};
use crate::timeseries::{Frequency, TimeSeries};
use crate::{Error, Result};

/// Regressor rows (row-major, `p` columns, first column the intercept) and aligned responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    x: Vec<f64>,
    y: Vec<f64>,
    p: usize,
}

impl Design {
    pub fn new(rows: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if p == 0 {
            return Err(Error::InvalidInput("design needs at least one regressor".into()));
        }
        if rows.len() != response.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} responses",
                rows.len(),
                response.len()
            )));
        }
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged design rows".into()));
        }
        Ok(Self {
            x: rows.concat(),
            y: response,
            p,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    /// Rows `range` as a new design.
    pub fn slice(&self, range: Range<usize>) -> Design {
        Design {
            x: self.x[range.start * self.p..range.end * self.p].to_vec(),
            y: self.y[range].to_vec(),
            p: self.p,
        }
    }

    pub fn x_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows(), self.p, &self.x)
    }

    pub fn y_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    /// `X'X` and `X'y` over rows `range`.
    pub fn cross_products(&self, range: Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.p;
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        for i in range {
            accumulate(&mut xtx, &mut xty, self.row(i), self.y[i], 1.0);
        }
        (xtx, xty)
    }

    /// Residual of row `i` under coefficients `beta`.
    pub fn residual(&self, i: usize, beta: &DVector<f64>) -> f64 {
        self.y[i] - dot(self.row(i), beta)
    }
}

pub(crate) fn dot(x: &[f64], beta: &DVector<f64>) -> f64 {
    x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
}

pub(crate) fn accumulate(xtx: &mut DMatrix<f64>, xty: &mut DVector<f64>, x: &[f64], y: f64, sign: f64) {
    let p = x.len();
    for a in 0..p {
        xty[a] += sign * x[a] * y;
        for b in 0..p {
            xtx[(a, b)] += sign * x[a] * x[b];
        }
    }
}

/// AR(1) design over series indices `range` (0-based, half-open): rows
/// `(1, y_{t-1})` with response `y_t` for `t` in `range.start+1 .. range.end`.
pub fn ar1_design(series: &TimeSeries, range: Range<usize>) -> Result<Design> {
    check_range(series, &range, 3)?;
    let v = series.values();
    let rows = (range.start + 1..range.end).map(|t| vec![1.0, v[t - 1]]).collect();
    let resp = v[range.start + 1..range.end].to_vec();
    Design::new(rows, resp)
}

/// Intercept-only design over `range`.
pub fn mean_design(series: &TimeSeries, range: Range<usize>) -> Result<Design> {
    check_range(series, &range, 2)?;
    let v = &series.values()[range];
    Design::new(vec![vec![1.0]; v.len()], v.to_vec())
}

fn check_range(series: &TimeSeries, range: &Range<usize>, min: usize) -> Result<()> {
    if range.end > series.len() || range.start >= range.end {
        return Err(Error::InvalidInput(format!(
            "range {range:?} outside series of length {}",
            series.len()
        )));
    }
    if range.len() < min {
        return Err(Error::InsufficientData {
            needed: min,
            available: range.len(),
        });
    }
    Ok(())
}

/// OLS estimate bundle.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub residuals: Vec<f64>,
    /// `sqrt(sum e^2 / (n - p))`.
    pub sigma_hat: f64,
    /// `(1/n) X'X`.
    pub moment: DMatrix<f64>,
    pub hac: Option<DMatrix<f64>>,
    pub nobs: usize,
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Classical covariance `sigma^2 (X'X)^{-1}`.
    pub fn classical_covariance(&self) -> Result<DMatrix<f64>> {
        let xtx = &self.moment * self.nobs as f64;
        Ok(inverse_spd(&xtx)? * self.sigma_hat.powi(2))
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }
}

pub fn ols_fit(design: &Design) -> Result<FitResult> {
    let n = design.rows();
    let p = design.p();
    if n < p {
        return Err(Error::InsufficientData {
            needed: p,
            available: n,
        });
    }
    let x = design.x_matrix();
    let xtx = x.tr_mul(&x);
    let rcond = rcond_sym(&xtx);
    if rcond < RCOND_MIN {
        return Err(Error::Singular { rcond, at: None });
    }
    let y = design.y_vector();
    let qr = x.clone().qr();
    let qty = qr.q().tr_mul(&y);
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or(Error::Singular { rcond, at: None })?;
    let residuals: Vec<f64> = (0..n).map(|i| design.residual(i, &beta)).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let dof = n.saturating_sub(p);
    let sigma_hat = if dof == 0 { 0.0 } else { (ssr / dof as f64).sqrt() };
    Ok(FitResult {
        beta,
        residuals,
        sigma_hat,
        moment: xtx / n as f64,
        hac: None,
        nobs: n,
    })
}

/// Default Newey-West truncation: 12 lags for tagged (weekly/monthly)
/// series, otherwise `floor(4 (n/100)^{2/9})`.
pub fn default_hac_lags(frequency: Frequency, nobs: usize) -> usize {
    match frequency {
        Frequency::Monthly | Frequency::Weekly => 12,
        Frequency::Untagged => (4.0 * (nobs as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize,
    }
}

/// Newey-West covariance of `beta` with Bartlett weights `1 - j/(lags+1)`.
/// `lags = 0` is the White (HC0) sandwich.
pub fn hac_covariance(design: &Design, fit: &FitResult, lags: usize) -> Result<DMatrix<f64>> {
    let n = design.rows();
    let p = design.p();
    if lags >= n {
        return Err(Error::InvalidInput(format!(
            "HAC lags {lags} must be below the row count {n}"
        )));
    }
    let e = &fit.residuals;
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for t in 0..n {
        let x = design.row(t);
        let w = e[t] * e[t];
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    for j in 1..=lags {
        let weight = 1.0 - j as f64 / (lags as f64 + 1.0);
        for t in j..n {
            let xt = design.row(t);
            let xs = design.row(t - j);
            let w = weight * e[t] * e[t - j];
            for a in 0..p {
                for b in 0..p {
                    meat[(a, b)] += w * (xt[a] * xs[b] + xs[a] * xt[b]);
                }
            }
        }
    }
    let bread = inverse_spd(&(&fit.moment * n as f64))?;
    Ok(symmetrize(&(&bread * meat * &bread)))
}

/// Recursive least squares with rank-one updates of `(X'X)^{-1}`; the
/// estimate is re-solved from the exact accumulated normal equations every
/// [`RecursiveOls::RESOLVE_EVERY`] updates.
#[derive(Debug, Clone)]
pub struct RecursiveOls {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    inv: DMatrix<f64>,
    beta: DVector<f64>,
    count: usize,
    since_resolve: usize,
}

impl RecursiveOls {
    pub const RESOLVE_EVERY: usize = 64;

    /// Initialises from the first `from` rows of `design`.
    pub fn new(design: &Design, from: usize) -> Result<Self> {
        let (xtx, xty) = design.cross_products(0..from);
        let beta = solve_spd(&xtx, &xty, Some(from))?;
        let inv = inverse_spd(&xtx).map_err(|_| Error::Singular {
            rcond: rcond_sym(&xtx),
            at: Some(from),
        })?;
        Ok(Self {
            xtx,
            xty,
            inv,
            beta,
            count: from,
            since_resolve: 0,
        })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn xtx(&self) -> &DMatrix<f64> {
        &self.xtx
    }

    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        accumulate(&mut self.xtx, &mut self.xty, x, y, 1.0);
        self.count += 1;
        self.since_resolve += 1;
        if self.since_resolve >= Self::RESOLVE_EVERY {
            self.beta = solve_spd(&self.xtx, &self.xty, Some(self.count))?;
            self.inv = inverse_spd(&self.xtx)?;
            self.since_resolve = 0;
            return Ok(());
        }
        let xv = DVector::from_column_slice(x);
        let px = &self.inv * &xv;
        let denom = 1.0 + xv.dot(&px);
        let gain = &px / denom;
        let err = y - xv.dot(&self.beta);
        self.beta += &gain * err;
        self.inv -= &gain * px.transpose();
        Ok(())
    }
}

/// `beta_j` for `j = from ..= rows`, each the OLS fit on the first `j` rows.
pub fn recursive_estimates(design: &Design, from: usize) -> Result<Vec<DVector<f64>>> {
    let p = design.p();
    if from < p + 1 || from > design.rows() {
        return Err(Error::InvalidInput(format!(
            "recursive estimates need p+1 = {} <= from <= {}, got {from}",
            p + 1,
            design.rows()
        )));
    }
    let mut rls = RecursiveOls::new(design, from)?;
    let mut out = Vec::with_capacity(design.rows() - from + 1);
    out.push(rls.beta().clone());
    for i in from..design.rows() {
        rls.update(design.row(i), design.response()[i])?;
        out.push(rls.beta().clone());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WindowEstimate {
    pub beta: DVector<f64>,
    /// `(1/width) X'X` over the window.
    pub moment: DMatrix<f64>,
}

/// OLS on rows `start .. start + width`.
pub fn window_estimate(design: &Design, start: usize, width: usize) -> Result<WindowEstimate> {
    let p = design.p();
    if width < p + 1 {
        return Err(Error::InvalidInput(format!(
            "window width {width} below p+1 = {}",
            p + 1
        )));
    }
    if start + width > design.rows() {
        return Err(Error::InsufficientData {
            needed: start + width,
            available: design.rows(),
        });
    }
    let (xtx, xty) = design.cross_products(start..start + width);
    let beta = solve_spd(&xtx, &xty, Some(start))?;
    Ok(WindowEstimate {
        beta,
        moment: xtx / width as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar1_draw(n: usize, mu: f64, rho: f64, seed: u64) -> TimeSeries {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![mu / (1.0 - rho)];
        for _ in 1..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            y.push(mu + rho * y.last().unwrap() + e);
        }
        TimeSeries::new(y).unwrap()
    }

    /// Normal equations solved by Cramer's rule for p = 2, independent of the QR path.
    fn cramer_ols(d: &Design) -> (f64, f64) {
        let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        let n = d.rows() as f64;
        for i in 0..d.rows() {
            let x = d.row(i)[1];
            let y = d.response()[i];
            sx += x;
            sxx += x * x;
            sy += y;
            sxy += x * y;
        }
        let det = n * sxx - sx * sx;
        ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det)
    }

    #[test]
    fn ar1_design_construction() {
        let ts = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        let d = ar1_design(&ts, 0..3).unwrap();
        assert_eq!(d.row(0), &[1.0, 1.0]);
        assert_eq!(d.row(1), &[1.0, 2.0]);
        assert_eq!(d.response(), &[2.0, 3.0]);
        assert!(ar1_design(&ts, 0..2).is_err());

        let c = TimeSeries::new(vec![4.0; 6]).unwrap();
        let d = ar1_design(&c, 0..6).unwrap();
        assert!(d.response().iter().all(|&v| v == 4.0));
        assert!((0..d.rows()).all(|i| d.row(i)[1] == 4.0));

        let d = ar1_design(&ar1_draw(100, 1.0, 0.3, 1), 0..100).unwrap();
        assert_eq!(d.rows(), 99);
    }

    #[test]
    fn constant_series_is_singular() {
        let c = TimeSeries::new(vec![2.0; 30]).unwrap();
        let d = ar1_design(&c, 0..30).unwrap();
        assert!(matches!(ols_fit(&d), Err(Error::Singular { .. })));
    }

    #[test]
    fn noiseless_ar1_exact_fit() {
        let mut y = vec![0.0];
        for _ in 0..20 {
            y.push(1.0 + 0.5 * y.last().unwrap());
        }
        let d = ar1_design(&TimeSeries::new(y).unwrap(), 0..21).unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!((fit.beta[0] - 1.0).abs() < 1e-9);
        assert!((fit.beta[1] - 0.5).abs() < 1e-9);
        assert!(fit.sigma_hat < 1e-9);
    }

    #[test]
    fn simulated_ar1_within_three_se_and_matches_cramer() {
        let ts = ar1_draw(1001, 1.0, 0.3, 42);
        let d = ar1_design(&ts, 0..1001).unwrap();
        let fit = ols_fit(&d).unwrap();
        let (a, b) = cramer_ols(&d);
        assert!((fit.beta[0] - a).abs() < 1e-10 && (fit.beta[1] - b).abs() < 1e-10);
        let cov = fit.classical_covariance().unwrap();
        assert!((fit.beta[0] - 1.0).abs() < 3.0 * cov[(0, 0)].sqrt());
        assert!((fit.beta[1] - 0.3).abs() < 3.0 * cov[(1, 1)].sqrt());
    }

    #[test]
    fn residuals_orthogonal_and_moment_psd() {
        for seed in 0..5 {
            let d = ar1_design(&ar1_draw(300, 0.5, 0.6, seed), 0..300).unwrap();
            let fit = ols_fit(&d).unwrap();
            for a in 0..2 {
                let s: f64 = (0..d.rows()).map(|i| fit.residuals[i] * d.row(i)[a]).sum();
                let scale: f64 = (0..d.rows()).map(|i| (fit.residuals[i] * d.row(i)[a]).abs()).sum();
                assert!(s.abs() <= 1e-8 * scale);
            }
            for i in 0..d.rows() {
                assert_eq!(fit.residuals[i], d.residual(i, &fit.beta));
            }
            let eig = fit.moment.clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&v| v >= 0.0));
            assert_eq!(fit.moment, fit.moment.transpose());
        }
    }

    #[test]
    fn hac_lag_zero_is_white() {
        let d = ar1_design(&ar1_draw(200, 1.0, 0.3, 9), 0..200).unwrap();
        let fit = ols_fit(&d).unwrap();
        let hac = hac_covariance(&d, &fit, 0).unwrap();
        // independent White sandwich through explicit matrices
        let x = d.x_matrix();
        let e = DMatrix::from_diagonal(&DVector::from_iterator(
            d.rows(),
            fit.residuals.iter().map(|r| r * r),
        ));
        let bread = (x.transpose() * &x).try_inverse().unwrap();
        let white = &bread * x.transpose() * e * &x * &bread;
        assert!((hac - white).abs().max() < 1e-12);
    }

    #[test]
    fn hac_close_to_classical_for_iid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![1.0, StandardNormal.sample(&mut rng)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 + 0.5 * r[1] + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let d = Design::new(rows, y).unwrap();
        let fit = ols_fit(&d).unwrap();
        let hac = hac_covariance(&d, &fit, 12).unwrap();
        let cls = fit.classical_covariance().unwrap();
        for a in 0..2 {
            let ratio = hac[(a, a)] / cls[(a, a)];
            assert!((0.8..1.2).contains(&ratio), "ratio {ratio}");
        }
        assert!(hac_covariance(&d, &fit, 2000).is_err());
    }

    #[test]
    fn default_lags() {
        assert_eq!(default_hac_lags(Frequency::Monthly, 208), 12);
        assert_eq!(default_hac_lags(Frequency::Untagged, 100), 4);
    }

    #[test]
    fn recursive_matches_refits() {
        let d = ar1_design(&ar1_draw(201, 1.0, 0.3, 3), 0..201).unwrap();
        let rec = recursive_estimates(&d, 3).unwrap();
        for (k, b) in rec.iter().enumerate() {
            let j = 3 + k;
            let refit = ols_fit(&d.slice(0..j)).unwrap();
            assert!((b - &refit.beta).abs().max() < 1e-8, "j = {j}");
        }
        let full = ols_fit(&d).unwrap();
        assert!((rec.last().unwrap() - &full.beta).abs().max() < 1e-8);
    }

    #[test]
    fn recursive_on_noiseless_is_constant() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..50).map(|i| 2.0 - 0.25 * i as f64).collect();
        let d = Design::new(rows, y).unwrap();
        for b in recursive_estimates(&d, 3).unwrap() {
            assert!((b[0] - 2.0).abs() < 1e-9 && (b[1] + 0.25).abs() < 1e-9);
        }
        assert!(recursive_estimates(&d, 2).is_err());
    }

    #[test]
    fn window_estimates() {
        let ts = ar1_draw(120, 1.0, 0.3, 8);
        let d = ar1_design(&ts, 0..120).unwrap();
        let full = window_estimate(&d, 0, d.rows()).unwrap();
        assert!((full.beta - ols_fit(&d).unwrap().beta).abs().max() < 1e-9);
        assert!(window_estimate(&d, 0, 2).is_err());

        // mean shift between two windows, intercept-only design
        let mut v: Vec<f64> = (0..40).map(|i| 0.1 * ((i * 7) % 5) as f64).collect();
        v.extend((0..40).map(|i| 3.0 + 0.1 * ((i * 7) % 5) as f64));
        let d = mean_design(&TimeSeries::new(v).unwrap(), 0..80).unwrap();
        let a = window_estimate(&d, 0, 40).unwrap();
        let b = window_estimate(&d, 40, 40).unwrap();
        let ra = ols_fit(&d.slice(0..40)).unwrap();
        let rb = ols_fit(&d.slice(40..80)).unwrap();
        assert!((a.beta[0] - ra.beta[0]).abs() < 1e-12);
        assert!((b.beta[0] - rb.beta[0]).abs() < 1e-12);
        assert!(a.beta[0] < 1.5 && b.beta[0] > 1.5);
    }
}
