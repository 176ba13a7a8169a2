//! Simulation commands: critical values and Monte Carlo experiments.

use std::path::{Path, PathBuf};

use anyhow::Result;

use seqbreak_core::critvals::{lambda_table, BridgeSimConfig, ProcessKind};
use seqbreak_core::montecarlo::{
    arl_distribution, empirical_power, BreakKind, empirical_size, kernel_density, power_curve, Experiment, McReport,
};
use seqbreak_core::{Boundary, BoundaryKind};

use crate::args::{ConfigArgs, CritArgs, CurveArgs};
use crate::config::ExperimentConfig;
use crate::data::parse;
use crate::output::{num, opt, usage};
use crate::Ctx;

fn parse_process(s: &str) -> Result<ProcessKind> {
    match s.trim().to_ascii_lowercase().as_str() {
        "re" => Ok(ProcessKind::Re),
        "cusum" | "ols-cusum" => Ok(ProcessKind::Cusum),
        "me" => Ok(ProcessKind::Me),
        "mosum" | "ols-mosum" => Ok(ProcessKind::Mosum),
        other => Err(usage(format!("unknown process {other:?} (expected re, cusum, me or mosum)"))),
    }
}

pub fn critical_values(args: &CritArgs, ctx: &Ctx) -> Result<()> {
    let kind: BoundaryKind = parse(&args.boundary)?;
    let mut boundary = Boundary::with_default_lambda(kind);
    if let Some(g) = args.gamma {
        boundary = boundary.gamma(g).map_err(|e| usage(e.to_string()))?;
    }
    let process = parse_process(&args.process)?;
    if args.horizons.is_empty() || args.alpha.is_empty() {
        return Err(usage("need at least one alpha and one horizon"));
    }
    let max_t = args.horizons.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cfg = BridgeSimConfig {
        replications: args.reps,
        steps_per_unit: args.steps,
        h: args.h,
        ..BridgeSimConfig::new(max_t, args.alpha[0], ctx.seed)
    };
    for &a in &args.alpha {
        BridgeSimConfig { alpha: a, ..cfg }.validate().map_err(|e| usage(e.to_string()))?;
    }
    let table = lambda_table(&cfg, &boundary, process, &args.alpha, &args.horizons)?;
    let mut header = vec!["alpha".to_string()];
    header.extend(args.horizons.iter().map(|t| format!("T={t}")));
    let rows: Vec<Vec<String>> = args
        .alpha
        .iter()
        .zip(&table)
        .map(|(a, row)| std::iter::once(num(*a)).chain(row.iter().map(|v| format!("{v:.4}"))).collect())
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = ctx.out.csv("critical_values.csv", &header_refs, &rows)?;
    print_table(&header, &rows);
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn print_table(header: &[String], rows: &[Vec<String>]) {
    println!("{}", header.join("\t"));
    for r in rows {
        println!("{}", r.join("\t"));
    }
}

pub const REPORT_HEADER: [&str; 9] = [
    "n",
    "N",
    "replications",
    "failures",
    "detections",
    "rejection_rate",
    "std_error",
    "arl_mean",
    "arl_sd",
];

pub fn report_row(r: &McReport) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.total.to_string(),
        r.replications.to_string(),
        r.failures.to_string(),
        r.detections.to_string(),
        num(r.rejection_rate),
        num(r.std_error),
        opt(r.arl_mean),
        opt(r.arl_sd),
    ]
}

#[derive(Clone, Copy)]
pub enum Cell {
    Size,
    Power,
    Arl,
}

fn output_name(configured: &Option<PathBuf>, default: &str) -> PathBuf {
    configured.clone().unwrap_or_else(|| Path::new(default).to_path_buf())
}

pub fn single_cell(args: &ConfigArgs, ctx: &Ctx, cell: Cell) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let exp = cfg.experiment(ctx.cli_seed, ctx.seed)?;
    let has_break = exp.dgp.break_kind != BreakKind::None;
    match cell {
        Cell::Size if has_break => return Err(usage("mc-size needs \"break_kind\": \"none\" in the dgp")),
        Cell::Power if !has_break => return Err(usage("mc-power needs a dgp with a break_kind")),
        _ => {}
    }
    let (report, stem) = match cell {
        Cell::Size => (empirical_size(&exp)?, "mc_size"),
        Cell::Power => (empirical_power(&exp)?, "mc_power"),
        Cell::Arl => (arl_distribution(&exp)?, "mc_arl"),
    };
    ctx.out.json(output_name(&cfg.output.report, &format!("{stem}.json")), &report)?;
    ctx.out.csv(
        output_name(&cfg.output.table, &format!("{stem}.csv")),
        &REPORT_HEADER,
        &[report_row(&report)],
    )?;
    if matches!(cell, Cell::Arl) {
        let delays: Vec<f64> = report.delays.iter().map(|&d| d as f64).collect();
        let rows: Vec<Vec<String>> = kernel_density(&delays, 512)
            .into_iter()
            .map(|(x, y)| vec![num(x), num(y)])
            .collect();
        ctx.out.csv(output_name(&cfg.output.density, "mc_arl_density.csv"), &["delay", "density"], &rows)?;
    }
    println!(
        "rate {:.4} (se {:.4}, {} of {} replications){}",
        report.rejection_rate,
        report.std_error,
        report.detections,
        report.replications,
        match (report.arl_mean, report.arl_sd) {
            (Some(m), Some(s)) => format!("; ARL {m:.1}, sd {s:.1}"),
            (Some(m), None) => format!("; ARL {m:.1}"),
            _ => String::new(),
        }
    );
    Ok(())
}

pub fn curve(args: &CurveArgs, ctx: &Ctx) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config.config)?;
    let exp = cfg.experiment(ctx.cli_seed, ctx.seed)?;
    let grid = args
        .n_grid
        .clone()
        .or_else(|| cfg.n_grid.clone())
        .ok_or_else(|| usage("mc-curve needs n_grid in the config or --n-grid"))?;
    if grid.is_empty() {
        return Err(usage("n grid is empty"));
    }
    for &n in &grid {
        Experiment { n, ..exp }
            .validate()
            .map_err(|e| usage(format!("n = {n}: {e}")))?;
    }
    let reports = power_curve(&exp, &grid)?;
    ctx.out.json(output_name(&cfg.output.report, "mc_curve.json"), &reports)?;
    let rows: Vec<Vec<String>> = reports.iter().map(report_row).collect();
    ctx.out.csv(output_name(&cfg.output.table, "mc_curve.csv"), &REPORT_HEADER, &rows)?;
    for r in &reports {
        println!("n = {:>5}: rate {:.4} (se {:.4})", r.n, r.rejection_rate, r.std_error);
    }
    Ok(())
}
