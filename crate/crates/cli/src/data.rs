//! Commands that work on a user-supplied series.

use std::str::FromStr;

use anyhow::{Context, Result};
use serde::Serialize;

use seqbreak_core::boundaries::Boundary;
use seqbreak_core::garch::{garch_fit, standardized_residuals, GarchParams, GarchStdErrors};
use seqbreak_core::linreg::{default_hac_lags, hac_covariance, ols_fit};
use seqbreak_core::monitor::{run_monitor_with, MonitorOptions};
use seqbreak_core::retro::{bai_perron, retro_cusum_sq, single_break_ls, sup_f, BreakEstimate, DesignKind, SupF};
use seqbreak_core::timeseries::{load_csv, Column, CsvOptions};
use seqbreak_core::{BoundaryKind, DetectorKind, DetectorSpec, Error, Frequency, ModelKind, TimeSeries};

use crate::args::{DataArgs, FitArgs, FrequencyArg, GarchArgs, MonitorArgs, RetroArgs};
use crate::output::{num, usage, OutDir};

/// Parses a named option, turning failures into usage errors.
pub fn parse<T: FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse::<T>().map_err(|e| usage(e.to_string()))
}

fn load(args: &DataArgs) -> Result<TimeSeries> {
    let opts = CsvOptions {
        column: Column::parse(&args.column),
        header: !args.no_header,
        label_column: args.label_column.as_deref().map(Column::parse),
        frequency: match args.frequency {
            FrequencyArg::Weekly => Frequency::Weekly,
            FrequencyArg::Monthly => Frequency::Monthly,
            FrequencyArg::Untagged => Frequency::Untagged,
        },
    };
    let series = load_csv(&args.data, &opts).map_err(|e| match e {
        Error::Io { .. } | Error::MissingColumn(_) => usage(e.to_string()),
        other => anyhow::Error::new(other).context(format!("reading {}", args.data.display())),
    })?;
    if args.difference == 0 {
        Ok(series)
    } else {
        Ok(series.difference(args.difference)?)
    }
}

fn label(series: &TimeSeries, index: usize) -> Option<String> {
    series.label(index).map(str::to_owned)
}

pub fn monitor(args: &MonitorArgs, out: &OutDir) -> Result<()> {
    let series = load(&args.data)?;
    let n = match (&args.n, &args.historical_end) {
        (Some(n), _) => *n,
        (None, Some(end)) => {
            let labels = series
                .labels()
                .ok_or_else(|| usage("--historical-end needs --label-column"))?;
            labels
                .iter()
                .position(|l| l == end)
                .map(|i| i + 1)
                .ok_or_else(|| usage(format!("label {end:?} not found")))?
        }
        (None, None) => return Err(usage("either --n or --historical-end is required")),
    };
    let kind: BoundaryKind = parse(&args.boundary)?;
    let boundary = Boundary::new(kind, args.lambda.unwrap_or(kind.default_lambda())).map_err(|e| usage(e.to_string()))?;
    let detector = DetectorSpec::new(parse::<DetectorKind>(&args.detector)?)
        .with_h(args.h)
        .map_err(|e| usage(e.to_string()))?;
    let model: ModelKind = parse(&args.model)?;
    let split = series.split(n, args.horizon)?;
    let opts = MonitorOptions {
        model,
        complete_path: args.complete_path,
    };
    let result = run_monitor_with(&series, &split, &detector, &boundary, &opts)?;

    let labels: Vec<Option<String>> = result.path.ks.iter().map(|&k| label(&series, n + k - 1)).collect();
    let has_labels = series.labels().is_some();
    out.json("monitor.json", &result)?;
    out.with_writer("monitor_path.csv", |w| {
        result.path.write_csv(w, has_labels.then_some(labels.as_slice()))?;
        Ok(())
    })?;
    match result.tau {
        Some(k) => println!(
            "detected: k = {k} (observation {}{})",
            n + k,
            result.tau_label.as_deref().map(|l| format!(", {l}")).unwrap_or_default()
        ),
        None => println!("no detection in {} monitoring observations", split.total - n),
    }
    Ok(())
}

#[derive(Serialize)]
struct Coefficient {
    name: &'static str,
    estimate: f64,
    std_error: f64,
    hac_std_error: f64,
    hac_t: f64,
}

#[derive(Serialize)]
struct FitReport {
    model: ModelKind,
    nobs: usize,
    sigma_hat: f64,
    hac_lags: usize,
    coefficients: Vec<Coefficient>,
}

pub fn fit(args: &FitArgs, out: &OutDir) -> Result<()> {
    let series = load(&args.data)?;
    let model: ModelKind = parse(&args.model)?;
    let end = args.n.unwrap_or(series.len());
    if end > series.len() {
        return Err(usage(format!("--n {end} exceeds the series length {}", series.len())));
    }
    let design = model.design(&series, 0..end)?;
    let fit = ols_fit(&design)?;
    let lags = args
        .hac_lags
        .unwrap_or_else(|| default_hac_lags(series.frequency(), design.rows()));
    let hac = hac_covariance(&design, &fit, lags)?;
    let classical = fit.classical_covariance()?;
    let names: &[&'static str] = match model {
        ModelKind::Ar1 => &["mu", "rho"],
        ModelKind::Mean => &["mu"],
    };
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let hac_se = hac[(i, i)].sqrt();
            Coefficient {
                name,
                estimate: fit.beta[i],
                std_error: classical[(i, i)].sqrt(),
                hac_std_error: hac_se,
                hac_t: fit.beta[i] / hac_se,
            }
        })
        .collect();
    let report = FitReport {
        model,
        nobs: fit.nobs,
        sigma_hat: fit.sigma_hat,
        hac_lags: lags,
        coefficients,
    };
    out.json("fit.json", &report)?;
    for c in &report.coefficients {
        println!(
            "{:>4} = {:>10.5}  se {:.5}  hac se {:.5}  t {:.2}",
            c.name, c.estimate, c.std_error, c.hac_std_error, c.hac_t
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct GarchReport {
    nobs: usize,
    params: GarchParams,
    robust_se: GarchStdErrors,
    loglik: f64,
    start_loglik: f64,
    h1: f64,
    converged: bool,
    evaluations: usize,
    near_integrated: bool,
}

pub fn garch(args: &GarchArgs, out: &OutDir) -> Result<()> {
    let series = load(&args.data)?;
    let fit = garch_fit(&series, args.ar)?;
    out.json(
        "garch_fit.json",
        &GarchReport {
            nobs: fit.std_residuals.len(),
            params: fit.params,
            robust_se: fit.robust_se,
            loglik: fit.loglik,
            start_loglik: fit.start_loglik,
            h1: fit.h1,
            converged: fit.converged,
            evaluations: fit.evaluations,
            near_integrated: fit.near_integrated,
        },
    )?;
    if fit.near_integrated {
        eprintln!("warning: alpha + beta > 0.999 (near-integrated variance)");
    }
    let resid = standardized_residuals(&fit, args.allow_unconverged)?;
    let offset = usize::from(args.ar);
    let rows: Vec<Vec<String>> = resid
        .values()
        .iter()
        .zip(&fit.cond_var)
        .enumerate()
        .map(|(i, (z, h))| {
            vec![
                label(&series, i + offset).unwrap_or_else(|| (i + offset + 1).to_string()),
                num(*z),
                num(*h),
            ]
        })
        .collect();
    out.csv("garch_residuals.csv", &["label", "value", "cond_var"], &rows)?;
    let p = fit.params;
    println!(
        "omega {:.6}  alpha {:.4}  beta {:.4}  loglik {:.3}{}",
        p.omega,
        p.alpha,
        p.beta,
        fit.loglik,
        if fit.converged { "" } else { "  (not converged)" }
    );
    Ok(())
}

#[derive(Serialize)]
struct Dated {
    #[serde(flatten)]
    estimate: BreakEstimate,
    labels: Vec<Option<String>>,
}

#[derive(Serialize)]
struct RetroReport {
    design: DesignKind,
    nobs: usize,
    trim: f64,
    single_break: Option<Dated>,
    partitions: Vec<Dated>,
    sup_f: SupF,
    sup_f_label: Option<String>,
    cusum_sq_argmax: Option<usize>,
    cusum_sq_label: Option<String>,
}

pub fn retro(args: &RetroArgs, out: &OutDir) -> Result<()> {
    let series = load(&args.data)?;
    let design: DesignKind = parse(&args.design)?;
    if args.max_breaks == 0 {
        return Err(usage("--max-breaks must be at least 1"));
    }
    if !(args.trim > 0.0 && args.trim < 0.5) {
        return Err(usage(format!("--trim must lie in (0, 0.5), got {}", args.trim)));
    }
    let date = |e: BreakEstimate| Dated {
        labels: e.breakpoints.iter().map(|&b| label(&series, b - 1)).collect(),
        estimate: e,
    };
    let single = match design {
        DesignKind::Mean => Some(date(single_break_ls(&series)?)),
        DesignKind::Ar1 => None,
    };
    let partitions = bai_perron(&series, args.max_breaks, args.trim, design)
        .context("dynamic programming break search")?
        .into_iter()
        .map(date)
        .collect();
    let f = sup_f(&series, args.trim, design, args.critical)?;
    let cs = retro_cusum_sq(&series, design)?;
    let report = RetroReport {
        design,
        nobs: series.len(),
        trim: args.trim,
        single_break: single,
        partitions,
        sup_f: f,
        sup_f_label: label(&series, f.argmax - 1),
        cusum_sq_argmax: cs.argmax,
        cusum_sq_label: cs.argmax.and_then(|k| label(&series, k - 1)),
    };
    out.json("retro.json", &report)?;
    let offset = match design {
        DesignKind::Mean => 0,
        DesignKind::Ar1 => 1,
    };
    let labels: Vec<Option<String>> = cs.path.ks.iter().map(|&k| label(&series, k - 1 + offset)).collect();
    out.with_writer("retro_cusum_sq.csv", |w| {
        cs.path.write_csv(w, series.labels().is_some().then_some(labels.as_slice()))?;
        Ok(())
    })?;
    println!(
        "sup-F {:.3} at {}{}",
        f.stat,
        f.argmax,
        f.reject.map(|r| if r { " (reject)" } else { " (no reject)" }).unwrap_or("")
    );
    for p in &report.partitions {
        println!("{} break(s): {:?} ssr {:.4}", p.estimate.breakpoints.len(), p.estimate.breakpoints, p.estimate.ssr);
    }
    Ok(())
}
