//! Command-line front end: `price`, `table` and `boundary` subcommands.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 1 for I/O problems writing outputs.

pub mod config;
pub mod output;
pub mod tables;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::extract_free_boundary;
use crate::error::Error;
use crate::model::{boundary_jumps_at_maturity, limit_boundary_s_star, Payoff};

use config::{OutputKind, RunConfig, SchemeOverrides, SolverName};
use tables::{convergence_study, doubling_levels, run_config, series_reference, Manifest, TableKind};

#[derive(Debug, Parser)]
#[command(name = "iterjump", version, about = "Iterated finite-difference pricing of American options under jump diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price the contract described by a config file.
    Price(CommonArgs),
    /// Reproduce a built-in table (1-4).
    Table {
        id: u32,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exercise boundary of every iterate, as CSV.
    Boundary(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Run configuration (for `table`: an alternative manifest).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for CSV artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverName>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Fill the wall-clock columns of CSV output (makes files non-reproducible).
    #[arg(long)]
    pub timings: bool,
}

impl CommonArgs {
    fn overrides(&self) -> SchemeOverrides {
        SchemeOverrides { solver: self.solver, theta: self.theta }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(Error),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. }
            | Error::SingularMatrix { .. }
            | Error::InvalidStructure { .. }
            | Error::DimensionMismatch { .. } => CliError::Numerical(e),
            _ => CliError::Config(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn load_config(args: &CommonArgs) -> CliResult<RunConfig> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config(Error::InvalidSpec("--config is required".into())))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(Error::InvalidSpec(format!("{}: {e}", path.display()))))?;
    let mut cfg = RunConfig::from_toml(&text).map_err(CliError::Config)?;
    args.overrides().apply(&mut cfg);
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn write_artifact(dir: Option<&Path>, name: &str, contents: &str) -> CliResult<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Write the sup-norm trace of a failed fixed point, then pass the error on.
fn dump_diagnostics(e: Error, dir: Option<&Path>, err: &mut dyn Write) -> CliError {
    if let Error::NoConvergence { trace, .. } = &e {
        let _ = writeln!(err, "sup-norm changes per iteration: {trace:?}");
        if let Err(io) = write_artifact(dir, "diagnostics.csv", &output::diagnostics_csv(trace)) {
            return io;
        }
    }
    e.into()
}

/// Run a parsed command line, writing reports to `out` and diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Price(args) => cmd_price(args, out, err),
        Command::Table { id, common } => cmd_table(*id, common, out, err),
        Command::Boundary(args) => cmd_boundary(args, out, err),
    }
}

pub fn cmd_price(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(args)?;
    let dir = args.out_dir.as_deref();
    let model = cfg.model_params()?;
    let option = cfg.option_spec()?;
    let keep = cfg.outputs.contains(&OutputKind::Boundary);
    let (result, seconds) = run_config(&cfg, keep).map_err(|e| dump_diagnostics(e, dir, err))?;

    let n = result.report.iterations;
    let bound = crate::engine::analytic_iteration_bound(&model, option.strike(), option.maturity, 0.0, n);
    let w = |e| io_err(Path::new("<stdout>"))(e);
    writeln!(out, "{:>10} {:>12} {:>6} {:>9} {:>12} {:>9}", "spot", "price", "iters", "psor_max", "bound", "seconds")
        .map_err(w)?;
    for &(spot, price) in &result.prices {
        writeln!(
            out,
            "{spot:>10.4} {price:>12.6} {n:>6} {:>9} {bound:>12.4e} {seconds:>9.3}",
            result.report.max_psor_iterations
        )
        .map_err(w)?;
        if let Some(reference) = series_reference(&cfg, spot) {
            writeln!(out, "{:>10} series {reference:.6} (gap {:+.6})", "", price - reference).map_err(w)?;
        }
    }

    for kind in &cfg.outputs {
        match kind {
            OutputKind::Price => {
                write_artifact(dir, "price.csv", &output::price_csv(&result, &model, &option, args.timings))?
            }
            OutputKind::Surface => write_artifact(dir, "surface.csv", &output::surface_csv(&result))?,
            OutputKind::Boundary => {
                if let Some(csv) = boundary_table(&result, option.strike()) {
                    write_artifact(dir, "boundary.csv", &csv)?;
                }
            }
            OutputKind::Convergence => {
                let rows = convergence_study(&cfg, &doubling_levels(&cfg, 4), false)
                    .map_err(|e| dump_diagnostics(e, dir, err))?;
                for (i, &spot) in cfg.spots.iter().enumerate() {
                    let series: Vec<_> = rows.iter().filter(|r| r.spot == spot).cloned().collect();
                    let name = if cfg.spots.len() == 1 { "convergence.csv".to_string() } else { format!("convergence_{i}.csv") };
                    write_artifact(dir, &name, &output::convergence_csv(&series, args.timings))?;
                }
            }
        }
    }
    Ok(())
}

fn boundary_table(result: &crate::engine::PriceResult, strike: f64) -> Option<String> {
    if result.boundary.is_empty() {
        return None;
    }
    let tol = 1e-6 * strike;
    let per_iterate: Vec<Vec<f64>> = result
        .iterates
        .iter()
        .skip(1)
        .map(|s| extract_free_boundary(s, &result.grid, strike, tol))
        .collect();
    Some(output::boundary_csv(&result.grid.t, &per_iterate, &result.boundary))
}

pub fn cmd_boundary(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(args)?;
    let dir = args.out_dir.as_deref();
    let model = cfg.model_params()?;
    let option = cfg.option_spec()?;
    if !(option.is_american() && matches!(option.payoff, Payoff::Put { .. })) {
        return Err(CliError::Config(Error::InvalidSpec("boundary needs an American put".into())));
    }
    let (result, _) = run_config(&cfg, true).map_err(|e| dump_diagnostics(e, dir, err))?;
    let csv = boundary_table(&result, option.strike()).unwrap_or_default();
    let w = |e| io_err(Path::new("<stdout>"))(e);
    if dir.is_some() {
        write_artifact(dir, "boundary.csv", &csv)?;
    } else {
        out.write_all(csv.as_bytes()).map_err(w)?;
    }
    let m = result.grid.time_steps();
    let near = result.boundary.get(m.saturating_sub(1)).copied().unwrap_or(f64::NAN);
    writeln!(out, "iterations {}  boundary at t = {:.6}: {near:.4}", result.report.iterations, result.grid.t[m.saturating_sub(1)])
        .map_err(w)?;
    if boundary_jumps_at_maturity(&model) {
        let s_star = limit_boundary_s_star(&model, option.strike())?;
        writeln!(out, "S* = {s_star:.4}").map_err(w)?;
    }
    Ok(())
}

pub fn cmd_table(id: u32, args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let manifest = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(Error::InvalidSpec(format!("{}: {e}", path.display()))))?;
            Manifest::from_toml(&text).map_err(CliError::Config)?
        }
        None => Manifest::builtin().map_err(CliError::Config)?,
    };
    let def = manifest.table(id).map_err(CliError::Config)?;
    let dir = args.out_dir.as_deref();
    let w = |e| io_err(Path::new("<stdout>"))(e);
    writeln!(out, "Table {id}: {}", def.title).map_err(w)?;
    match def.kind {
        TableKind::Prices => {
            let rows = tables::run_price_table(def, &args.overrides()).map_err(|e| dump_diagnostics(e, dir, err))?;
            writeln!(out, "{:>3} {:<44} {:>8} {:>10} {:>9} {:>9} {:>10} {:>5}", "row", "label", "spot", "value", "published", "diff", "oracle", "iters")
                .map_err(w)?;
            for r in &rows {
                let oracle = r.oracle.map(|o| format!("{o:.5}")).unwrap_or_default();
                writeln!(
                    out,
                    "{:>3} {:<44} {:>8.2} {:>10.5} {:>9.5} {:>+9.5} {:>10} {:>5}",
                    r.row,
                    r.label,
                    r.spot,
                    r.value,
                    r.published,
                    r.value - r.published,
                    oracle,
                    r.iterations
                )
                .map_err(w)?;
            }
            write_artifact(dir, &format!("table{id}.csv"), &output::table_csv(&rows, args.timings))?;
        }
        TableKind::Convergence => {
            let rows =
                tables::run_convergence_table(def, &args.overrides()).map_err(|e| dump_diagnostics(e, dir, err))?;
            writeln!(
                out,
                "{:>6} {:>5} {:>5} {:>11} {:>11} {:>10} {:>10} {:>8} {:>6}",
                "spot", "L", "M", "alternate", "value", "diff", "published", "psor_max", "iters"
            )
            .map_err(w)?;
            let spots: Vec<f64> = {
                let mut s: Vec<f64> = rows.iter().map(|r| r.spot).collect();
                s.dedup();
                s
            };
            for (i, &spot) in spots.iter().enumerate() {
                let series: Vec<_> = rows.iter().filter(|r| r.spot == spot).cloned().collect();
                for (k, r) in series.iter().enumerate() {
                    let published = k
                        .checked_sub(1)
                        .and_then(|k| def.published_diff.get(i).and_then(|d| d.get(k)))
                        .map(|p| format!("{p:+.5}"))
                        .unwrap_or_else(|| "n.a.".into());
                    let diff = r.diff.map(|d| format!("{d:+.5}")).unwrap_or_else(|| "n.a.".into());
                    writeln!(
                        out,
                        "{:>6.1} {:>5} {:>5} {:>11.5} {:>11.5} {:>10} {:>10} {:>8} {:>6}",
                        spot,
                        r.intervals,
                        r.time_steps,
                        r.alternate.unwrap_or(f64::NAN),
                        r.value,
                        diff,
                        published,
                        r.psor_max,
                        r.iterations
                    )
                    .map_err(w)?;
                }
                write_artifact(dir, &format!("table{id}_S{spot}.csv"), &output::convergence_csv(&series, args.timings))?;
            }
        }
    }
    Ok(())
}
