//! Regeneration of the reference tables.

use anyhow::Result;

use seqbreak_core::critvals::{lambda_table, BridgeSimConfig, ProcessKind};
use seqbreak_core::montecarlo::{run_experiment, DgpSpec, Experiment, McReport};
use seqbreak_core::rng::derive_seed;
use seqbreak_core::{Boundary, BoundaryKind, DetectorKind, DetectorSpec};

use crate::args::{ReproduceArgs, Table};
use crate::campaign::print_table;
use crate::output::{num, opt, usage};
use crate::Ctx;

const FULL_PATHS: usize = 25_000;
const FULL_REPS: usize = 2_500;
const N_GRID: [usize; 4] = [50, 100, 200, 1000];

/// Boundaries of the simulation tables with their 5% constants; RE is run
/// with the same constant as OLS-CUSUM.
fn boundaries() -> [(&'static str, Boundary); 3] {
    let b = |kind, lambda| Boundary::new(kind, lambda).expect("valid constant");
    [
        ("b1", b(BoundaryKind::B1, 7.78)),
        ("b2", b(BoundaryKind::B2, 3.15)),
        ("b3", b(BoundaryKind::B3, 1.577)),
    ]
}

const DETECTORS: [(&str, DetectorKind); 2] = [("cusum", DetectorKind::OlsCusum), ("re", DetectorKind::Re)];

pub fn run(args: &ReproduceArgs, ctx: &Ctx) -> Result<()> {
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(usage(format!("--scale must be positive, got {}", args.scale)));
    }
    if args.reps == Some(0) {
        return Err(usage("--reps must be at least 1"));
    }
    match args.table {
        Table::Table1 => table1(args, ctx),
        Table::Table2 => table2(args, ctx),
        Table::Table3 => moments_table(args, ctx, "table3.csv", |loc| DgpSpec {
            break_loc: loc,
            ..DgpSpec::default()
        }),
        Table::Table4 => moments_table(args, ctx, "table4.csv", |loc| DgpSpec::mu_shift(1.5, loc)),
    }
}

fn scaled(args: &ReproduceArgs, full: usize) -> usize {
    args.reps.unwrap_or_else(|| ((full as f64 * args.scale).round() as usize).max(1))
}

fn n_grid(args: &ReproduceArgs) -> Vec<usize> {
    N_GRID
        .into_iter()
        .filter(|&n| args.scale >= 1.0 || n as f64 <= 1000.0 * args.scale)
        .collect()
}

fn table1(args: &ReproduceArgs, ctx: &Ctx) -> Result<()> {
    let horizons: Vec<f64> = (1..=10).map(f64::from).collect();
    let alphas = [0.05, 0.10];
    let cfg = BridgeSimConfig {
        replications: scaled(args, FULL_PATHS),
        ..BridgeSimConfig::new(10.0, alphas[0], ctx.seed)
    };
    let b3 = Boundary::with_default_lambda(BoundaryKind::B3);
    let table = lambda_table(&cfg, &b3, ProcessKind::Re, &alphas, &horizons)?;
    let mut header = vec!["alpha".to_string()];
    header.extend(horizons.iter().map(|t| format!("T={t}")));
    let rows: Vec<Vec<String>> = alphas
        .iter()
        .zip(&table)
        .map(|(a, row)| std::iter::once(num(*a)).chain(row.iter().map(|v| format!("{v:.4}"))).collect())
        .collect();
    write(ctx, "table1.csv", &header, &rows)
}

fn write(ctx: &Ctx, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = ctx.out.csv(name, &refs, rows)?;
    print_table(header, rows);
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Runs every cell in order with its own derived seed.
struct Cells<'a> {
    ctx: &'a Ctx,
    reps: usize,
    next: u64,
}

impl Cells<'_> {
    fn run(&mut self, dgp: DgpSpec, kind: DetectorKind, boundary: Boundary, n: usize) -> Result<McReport> {
        self.next += 1;
        let exp = Experiment {
            replications: self.reps,
            seed: derive_seed(self.ctx.seed, self.next),
            ..Experiment::new(dgp, DetectorSpec::new(kind), boundary, n)
        };
        Ok(run_experiment(&exp)?)
    }
}

fn table2(args: &ReproduceArgs, ctx: &Ctx) -> Result<()> {
    let locs = [(25, 0.25), (50, 0.5)];
    let rhos = [0.5, 0.6, 0.7];
    let mut header = vec!["boundary".to_string(), "n".to_string()];
    for (pct, _) in locs {
        for (name, _) in DETECTORS {
            header.extend(rhos.iter().map(|r| format!("loc{pct}_{name}_rho{r}")));
        }
    }
    let mut cells = Cells { ctx, reps: scaled(args, FULL_REPS), next: 0 };
    let mut rows = Vec::new();
    for (bname, boundary) in boundaries() {
        for n in n_grid(args) {
            let mut row = vec![bname.to_string(), n.to_string()];
            for (_, loc) in locs {
                for (_, kind) in DETECTORS {
                    for &r in &rhos {
                        let report = cells.run(DgpSpec::rho_shift(r, loc), kind, boundary, n)?;
                        row.push(format!("{:.4}", report.rejection_rate));
                    }
                }
            }
            rows.push(row);
        }
    }
    write(ctx, "table2.csv", &header, &rows)
}

/// Rejection rate, mean delay and delay spread per location and detector.
fn moments_table(args: &ReproduceArgs, ctx: &Ctx, name: &str, dgp: impl Fn(f64) -> DgpSpec) -> Result<()> {
    let locs = [(25, 0.25), (50, 0.5), (75, 0.75)];
    let mut header = vec!["boundary".to_string(), "n".to_string()];
    for (pct, _) in locs {
        for (det, _) in DETECTORS {
            for metric in ["pct", "arl", "sd"] {
                header.push(format!("loc{pct}_{det}_{metric}"));
            }
        }
    }
    let mut cells = Cells { ctx, reps: scaled(args, FULL_REPS), next: 0 };
    let mut rows = Vec::new();
    for (bname, boundary) in boundaries() {
        for n in n_grid(args) {
            let mut row = vec![bname.to_string(), n.to_string()];
            for (_, loc) in locs {
                for (_, kind) in DETECTORS {
                    let r = cells.run(dgp(loc), kind, boundary, n)?;
                    row.push(format!("{:.2}", 100.0 * r.rejection_rate));
                    row.push(opt(r.arl_mean.map(|v| (v * 10.0).round() / 10.0)));
                    row.push(opt(r.arl_sd.map(|v| (v * 10.0).round() / 10.0)));
                }
            }
            rows.push(row);
        }
    }
    write(ctx, name, &header, &rows)
}
