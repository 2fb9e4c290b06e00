use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;

use ecb_inflation::affine::{bond_price_affine, solve_ab, zciis_from_solutions, Leg};
use ecb_inflation::calibration::{
    calibrate_panels, format_table, write_per_date, write_summary, CalibResult, CalibSpec,
    ModelKind, SummaryRow,
};
use ecb_inflation::claims::{bond_curve, zciis_from_bonds, ClaimSpec};
use ecb_inflation::data_io::{
    build_panels, read_quotes_path, EcbRateSeries, HicpSeries, QuotePanel, DEFAULT_SIGMA_WINDOW,
};
use ecb_inflation::pide::Grid;
use ecb_inflation::simulator::{mc_price, simulate_path, PathConfig};
use ecb_inflation::State;

use crate::config::{FileConfig, GridOverride};
use crate::{CalibrateArgs, Cli, Command, CompareArgs, DataArgs, PriceArgs, SimulateArgs};

/// Evaluation cap per date for our model when none is configured; each
/// evaluation is a full PIDE curve.
const OURS_DEFAULT_MAX_EVALS: usize = 400;

struct Run {
    cfg: FileConfig,
    out: PathBuf,
    seed: u64,
    grid: Option<GridOverride>,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let ctx = Run {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        cfg,
        out,
        grid: cli.grid,
    };
    match &cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Price(a) => price(&ctx, a),
        Command::Calibrate(a) => calibrate(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn simulate(ctx: &Run, a: &SimulateArgs) -> Result<()> {
    if a.paths == 0 {
        bail!("--paths must be at least 1");
    }
    let mp = ctx.cfg.model_params()?;
    let init = ctx.cfg.state(&mp, a.state.as_deref())?;
    let s = &ctx.cfg.simulate;
    let pcfg = PathConfig {
        horizon: a.horizon.or(s.horizon).unwrap_or(1.0),
        dt: a.dt.or(s.dt).unwrap_or(1.0 / 1200.0),
        seed: ctx.seed,
        scheme: ctx.cfg.scheme()?,
    };
    pcfg.validate(mp.t1())?;
    let dir = ctx.out.join("paths");
    fs::create_dir_all(&dir)?;
    let ends = (0..a.paths)
        .into_par_iter()
        .map(|i| -> Result<(State, usize, usize)> {
            let p = simulate_path(&mp, init, &pcfg, i as u64)?;
            let mut w = create(&dir.join(format!("path_{i:06}.csv")))?;
            p.write_csv(&mut w)?;
            w.flush()?;
            Ok((p.terminal(), p.floored, p.times.len() - 1))
        })
        .collect::<Result<Vec<_>>>()?;

    let column = |f: fn(&State) -> f64| ends.iter().map(|(s, _, _)| f(s)).collect::<Vec<_>>();
    let mut w = create(&ctx.out.join("simulate_summary.csv"))?;
    writeln!(w, "variable,mean,std")?;
    for (name, f) in [
        ("pi", (|s: &State| s.pi) as fn(&State) -> f64),
        ("r", |s: &State| s.r),
        ("rsh", |s: &State| s.z),
    ] {
        let (m, sd) = mean_std(&column(f));
        writeln!(w, "{name},{m},{sd}")?;
        println!("{name:>4}: mean {m:.6} std {sd:.6}");
    }
    w.flush()?;
    let floored: usize = ends.iter().map(|e| e.1).sum();
    let nodes: usize = ends.iter().map(|e| e.2).sum();
    println!(
        "{} paths written to {}; floored node fraction {:.3e}",
        a.paths,
        dir.display(),
        floored as f64 / nodes.max(1) as f64
    );
    Ok(())
}

fn price(ctx: &Run, a: &PriceArgs) -> Result<()> {
    let kind: ModelKind = a.model.parse().map_err(anyhow::Error::msg)?;
    let mats = &a.maturity;
    if mats.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        bail!("maturities must be finite and nonnegative");
    }
    let t_max = mats.iter().cloned().fold(0.0, f64::max);
    // (nominal, real, zciis or NaN at τ = 0)
    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(mats.len());
    let mut mc: Vec<Option<[f64; 4]>> = vec![None; mats.len()];
    match kind {
        ModelKind::Ours => {
            let mp = ctx.cfg.model_params()?;
            let state = ctx.cfg.state(&mp, a.state.as_deref())?;
            let spec = ctx.cfg.grid_spec(ctx.grid, &mp)?;
            let grid = Grid::build(&spec, &mp, t_max.max(mp.t1()), Some(state))?;
            let snapped = grid.rate(grid.rate_row(state.r)?);
            if (snapped - state.r).abs() > 1e-12 {
                warn!("ECB rate {} is off the lattice; priced at {snapped}", state.r);
            }
            let positive: Vec<f64> = mats.iter().cloned().filter(|&t| t > 0.0).collect();
            let mut curve = bond_curve(&mp, &grid, 0.0, &positive, state)?.into_iter();
            for &t in mats {
                if t > 0.0 {
                    let (pn, pr) = curve.next().expect("one price pair per maturity");
                    rows.push((pn, pr, zciis_from_bonds(pn, pr, t)?));
                } else {
                    rows.push((1.0, 1.0, f64::NAN));
                }
            }
            if a.mc_check {
                let pcfg = PathConfig {
                    horizon: t_max.max(a.mc_dt),
                    dt: a.mc_dt,
                    seed: ctx.seed,
                    scheme: ctx.cfg.scheme()?,
                };
                for (k, &t) in mats.iter().enumerate() {
                    let (n, sn) = mc_price(&ClaimSpec::unit(0.0, t)?, &mp, state, a.mc_paths, &pcfg)?;
                    let (r, sr) = mc_price(&ClaimSpec::unit(1.0, t)?, &mp, state, a.mc_paths, &pcfg)?;
                    mc[k] = Some([n, sn, r, sr]);
                }
            }
        }
        ModelKind::Affine => {
            if a.mc_check {
                bail!("--mc-check is available for the ours model only");
            }
            let (p, x) = ctx.cfg.affine(a.state.as_deref())?;
            let step = ctx.cfg.ode_step();
            let n = solve_ab(&p, Leg::Nominal, t_max, step)?;
            let r = solve_ab(&p, Leg::Real, t_max, step)?;
            for &t in mats {
                let pn = bond_price_affine(&n, &x, t)?;
                let pr = bond_price_affine(&r, &x, t)?;
                let k = if t > 0.0 {
                    zciis_from_solutions(&n, &r, &x, t)?
                } else {
                    f64::NAN
                };
                rows.push((pn, pr, k));
            }
        }
    }

    let path = ctx.out.join(format!("price_{}.csv", kind.label()));
    let mut w = create(&path)?;
    let mut header = "maturity,nominal,real,zciis_percent".to_string();
    if a.mc_check {
        header.push_str(",mc_nominal,mc_nominal_se,mc_real,mc_real_se");
    }
    writeln!(w, "{header}")?;
    println!("{header}");
    for (k, (&t, &(pn, pr, z))) in mats.iter().zip(&rows).enumerate() {
        let zs = if z.is_nan() {
            String::new()
        } else {
            (100.0 * z).to_string()
        };
        let mut line = format!("{t},{pn},{pr},{zs}");
        if let Some(m) = mc[k] {
            line.push_str(&format!(",{},{},{},{}", m[0], m[1], m[2], m[3]));
        }
        writeln!(w, "{line}")?;
        println!("{line}");
    }
    w.flush()?;
    Ok(())
}

fn load_panels(ctx: &Run, d: &DataArgs) -> Result<Vec<QuotePanel>> {
    let data = &ctx.cfg.data;
    let quotes_path = d
        .quotes
        .clone()
        .or_else(|| data.quotes.clone())
        .context("no quote file: pass --quotes or set [data] quotes")?;
    let hicp_path = d
        .hicp
        .clone()
        .or_else(|| data.hicp.clone())
        .context("no HICP file: pass --hicp or set [data] hicp")?;
    let quotes = read_quotes_path(&quotes_path)
        .with_context(|| format!("reading {}", quotes_path.display()))?;
    if quotes.is_empty() {
        bail!("quote file {} holds no quotes", quotes_path.display());
    }
    let hicp = HicpSeries::read_path(&hicp_path)
        .with_context(|| format!("reading {}", hicp_path.display()))?;
    let ecb = match d.ecb_rates.clone().or_else(|| data.ecb_rates.clone()) {
        Some(p) => Some(
            EcbRateSeries::read_path(&p).with_context(|| format!("reading {}", p.display()))?,
        ),
        None => None,
    };
    let window = data.sigma_window.unwrap_or(DEFAULT_SIGMA_WINDOW);
    let panels = build_panels(&quotes, &hicp, window, ecb.as_ref())?;
    if panels.is_empty() {
        bail!("no quote date matches an HICP observation with enough history");
    }
    info!("{} panels from {}", panels.len(), quotes_path.display());
    Ok(panels)
}

fn calib_spec(ctx: &Run, kind: ModelKind, d: &DataArgs) -> Result<CalibSpec> {
    let mut spec = ctx.cfg.calib_spec(kind, ctx.grid, ctx.seed)?;
    if let Some(n) = d.max_evals {
        spec.optimizer.max_evals = Some(n);
    }
    if kind == ModelKind::Ours && spec.optimizer.max_evals.is_none() {
        spec.optimizer.max_evals = Some(OURS_DEFAULT_MAX_EVALS);
    }
    Ok(spec)
}

fn run_model(ctx: &Run, kind: ModelKind, d: &DataArgs, panels: &[QuotePanel]) -> Result<Vec<CalibResult>> {
    let spec = calib_spec(ctx, kind, d)?;
    let warm = d.warm_start || ctx.cfg.optimizer.warm_start.unwrap_or(false);
    let results = calibrate_panels(panels, &spec, warm)?;
    for r in &results {
        info!(
            "{} {}: rmse {:.4e} arpe {:.4e} ({} evaluations)",
            r.date,
            kind.label(),
            r.rmse,
            r.arpe,
            r.evaluations
        );
    }
    Ok(results)
}

fn write_fits(results: &[CalibResult], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "date,model,maturity,market_percent,fitted_percent")?;
    for r in results {
        for ((t, m), f) in r.maturities.iter().zip(&r.market_percent).zip(&r.fitted_percent) {
            writeln!(w, "{},{},{t},{m},{f}", r.date, r.model.label())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn calibrate(ctx: &Run, a: &CalibrateArgs) -> Result<()> {
    let kind: ModelKind = a.model.parse().map_err(anyhow::Error::msg)?;
    let panels = load_panels(ctx, &a.data)?;
    let results = run_model(ctx, kind, &a.data, &panels)?;
    let label = kind.label();
    let mut w = create(&ctx.out.join(format!("calib_{label}_per_date.csv")))?;
    write_per_date(&results, &mut w)?;
    w.flush()?;
    write_fits(&results, &ctx.out.join(format!("calib_{label}_fits.csv")))?;
    let row = SummaryRow::from_results(kind, &results)?;
    let mut w = create(&ctx.out.join(format!("calib_{label}_summary.csv")))?;
    write_summary(&[row], &mut w)?;
    w.flush()?;
    println!(
        "{}: {} dates, RMSE_bar {:.4e}, ARPE_bar {:.4e}",
        kind.display_name(),
        results.len(),
        row.rmse_bar,
        row.arpe_bar
    );
    Ok(())
}

fn compare(ctx: &Run, a: &CompareArgs) -> Result<()> {
    let panels = load_panels(ctx, &a.data)?;
    let ours = run_model(ctx, ModelKind::Ours, &a.data, &panels)?;
    let affine = run_model(ctx, ModelKind::Affine, &a.data, &panels)?;
    let rows = [
        SummaryRow::from_results(ModelKind::Ours, &ours)?,
        SummaryRow::from_results(ModelKind::Affine, &affine)?,
    ];
    let all: Vec<CalibResult> = ours.iter().chain(&affine).cloned().collect();
    let mut w = create(&ctx.out.join("compare_per_date.csv"))?;
    write_per_date(&all, &mut w)?;
    w.flush()?;
    write_fits(&all, &ctx.out.join("compare_fits.csv"))?;
    let mut w = create(&ctx.out.join("compare_summary.csv"))?;
    write_summary(&rows, &mut w)?;
    w.flush()?;
    let period = a
        .period
        .clone()
        .or_else(|| ctx.cfg.data.period.clone())
        .unwrap_or_else(|| {
            let first = panels.first().map(|p| p.date);
            let last = panels.last().map(|p| p.date);
            match (first, last) {
                (Some(f), Some(l)) if f != l => format!("the period {f} to {l}"),
                (Some(f), _) => format!("{f}"),
                _ => String::from("the sample"),
            }
        });
    let table = format_table(&rows, &period);
    fs::write(ctx.out.join("compare_table.txt"), &table)?;
    print!("{table}");
    Ok(())
}
