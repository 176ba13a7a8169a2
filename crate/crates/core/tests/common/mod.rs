#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use seqbreak_core::linreg::{ols_fit, Design};
use seqbreak_core::rng::replication_rng;
use seqbreak_core::TimeSeries;

/// `y_t = 1 + rho y_{t-1} + e_t` started at its mean.
pub fn ar1(len: usize, rho: f64, seed: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, 0);
    let mut y = vec![1.0 / (1.0 - rho)];
    while y.len() < len {
        let e: f64 = rng.sample(StandardNormal);
        y.push(1.0 + rho * y.last().unwrap() + e);
    }
    y
}

pub fn normals(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, 0);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn series(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new(values).unwrap()
}

/// Two-pass sum of squared deviations from the mean.
pub fn mean_ssr(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m).powi(2)).sum()
}

/// SSR of a segment of `design` by a fresh OLS fit.
pub fn segment_ssr(design: &Design, a: usize, b: usize) -> f64 {
    ols_fit(&design.slice(a..b)).unwrap().ssr()
}

/// Every increasing cut vector of length `m` on `rows` rows whose segments
/// are at least `h` long, with its total SSR.
pub fn enumerate_partitions(rows: usize, m: usize, h: usize, cost: &dyn Fn(usize, usize) -> f64) -> Vec<(Vec<usize>, f64)> {
    fn rec(
        start: usize,
        left: usize,
        rows: usize,
        h: usize,
        cuts: &mut Vec<usize>,
        acc: f64,
        cost: &dyn Fn(usize, usize) -> f64,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if left == 0 {
            if rows - start >= h {
                out.push((cuts.clone(), acc + cost(start, rows)));
            }
            return;
        }
        let mut c = start + h;
        while c + h * left <= rows {
            cuts.push(c);
            rec(c, left - 1, rows, h, cuts, acc + cost(start, c), cost, out);
            cuts.pop();
            c += 1;
        }
    }
    let mut out = Vec::new();
    rec(0, m, rows, h, &mut Vec::new(), 0.0, cost, &mut out);
    out
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
