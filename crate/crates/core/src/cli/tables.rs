//! Built-in reproduction tables, driven by an embedded TOML manifest.

use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::engine::{iterate_to_fixed_point, PriceResult, SolverKind};
use crate::error::{Error, Result};
use crate::grid::build_grid;
use crate::model::{ExerciseStyle, JumpDistribution};
use crate::oracle::merton_european_series;

use super::config::{DtRule, RunConfig, SchemeOverrides};

pub const BUILTIN_MANIFEST: &str = include_str!("tables.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tables: Vec<TableDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Prices,
    Convergence,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDef {
    pub id: u32,
    pub kind: TableKind,
    pub title: String,
    pub base: toml::Table,
    pub rows: Vec<RowDef>,
    /// `(L, M)` pairs for convergence tables.
    #[serde(default)]
    pub levels: Vec<(usize, usize)>,
    #[serde(default)]
    pub published_psor_max: Vec<usize>,
    #[serde(default)]
    pub published_diff: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDef {
    pub label: String,
    #[serde(default)]
    pub set: toml::Table,
    pub published: Vec<f64>,
}

impl Manifest {
    pub fn builtin() -> Result<Self> {
        Self::from_toml(BUILTIN_MANIFEST)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let manifest: Manifest = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        for t in &manifest.tables {
            for row in &t.rows {
                let cfg = t.row_config(row)?;
                if row.published.len() != cfg.spots.len() {
                    return Err(Error::InvalidSpec(format!(
                        "table {} row '{}': {} published values for {} spots",
                        t.id,
                        row.label,
                        row.published.len(),
                        cfg.spots.len()
                    )));
                }
            }
        }
        Ok(manifest)
    }

    pub fn table(&self, id: u32) -> Result<&TableDef> {
        self.tables
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| Error::InvalidSpec(format!("no table with id {id}")))
    }
}

impl TableDef {
    /// The base configuration with the row's dotted-key overrides applied.
    pub fn row_config(&self, row: &RowDef) -> Result<RunConfig> {
        let mut doc = self.base.clone();
        for (key, value) in &row.set {
            set_dotted(&mut doc, key, value.clone())?;
        }
        let cfg: RunConfig =
            toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| Error::InvalidSpec(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set_dotted(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut table = doc;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        table = table
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidSpec(format!("override '{key}' crosses a non-table value")))?;
    }
    Err(Error::InvalidSpec("empty override key".into()))
}

/// One priced spot of a table row.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRow {
    pub row: usize,
    pub label: String,
    pub spot: f64,
    pub value: f64,
    pub published: f64,
    /// Closed-form European value where one exists.
    pub oracle: Option<f64>,
    pub iterations: usize,
    pub psor_max: usize,
    pub seconds: f64,
}

/// Run a configuration, returning the result and the elapsed wall-clock time.
pub fn run_config(cfg: &RunConfig, keep_iterates: bool) -> Result<(PriceResult, f64)> {
    let model = cfg.model_params()?;
    let option = cfg.option_spec()?;
    let grid = build_grid(&cfg.grid_spec(), &option, &model.jump)?;
    let engine = crate::engine::EngineConfig { keep_iterates, ..cfg.engine_config()? };
    let start = Instant::now();
    let result = iterate_to_fixed_point(&model, &option, &grid, &engine, &cfg.spots)?;
    Ok((result, start.elapsed().as_secs_f64()))
}

/// Merton series value for European Gaussian contracts without barrier.
pub fn series_reference(cfg: &RunConfig, spot: f64) -> Option<f64> {
    let model = cfg.model_params().ok()?;
    let option = cfg.option_spec().ok()?;
    let gaussian = matches!(model.jump, JumpDistribution::Gaussian { .. });
    if !gaussian || option.style != ExerciseStyle::European || option.barrier.is_some() {
        return None;
    }
    merton_european_series(&model, &option, spot).ok().map(|s| s.price)
}

pub fn run_price_table(def: &TableDef, overrides: &SchemeOverrides) -> Result<Vec<PriceRow>> {
    let rows = def
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cfg = def.row_config(row)?;
            overrides.apply(&mut cfg);
            let (result, seconds) = run_config(&cfg, false)?;
            Ok(result
                .prices
                .iter()
                .zip(&row.published)
                .map(|(&(spot, value), &published)| PriceRow {
                    row: i + 1,
                    label: row.label.clone(),
                    spot,
                    value,
                    published,
                    oracle: series_reference(&cfg, spot),
                    iterations: result.report.iterations,
                    psor_max: result.report.max_psor_iterations,
                    seconds,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// One grid level of a convergence study at one spot.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub spot: f64,
    pub intervals: usize,
    pub time_steps: usize,
    /// Value with the configured solver.
    pub value: f64,
    /// `value` minus the value one level coarser.
    pub diff: Option<f64>,
    pub psor_max: usize,
    pub iterations: usize,
    pub seconds: f64,
    /// Value with the other LCP solver, when requested.
    pub alternate: Option<f64>,
}

/// Price `cfg` on each `(L, M)` level; `M = None` keeps the configured rule.
pub fn convergence_study(
    cfg: &RunConfig,
    levels: &[(usize, Option<usize>)],
    compare_solvers: bool,
) -> Result<Vec<ConvergenceRow>> {
    let runs = levels
        .par_iter()
        .map(|&(l, m)| {
            let mut level = cfg.clone();
            level.grid.intervals = l;
            if let Some(m) = m {
                level.grid.dt_rule = DtRule::Steps(m);
            }
            let (main, seconds) = run_config(&level, false)?;
            let alternate = if compare_solvers {
                let mut other = level.clone();
                other.scheme.solver = match level.scheme.solver.kind() {
                    SolverKind::Psor => super::config::SolverName::BrennanSchwartz,
                    SolverKind::BrennanSchwartz => super::config::SolverName::Psor,
                };
                Some(run_config(&other, false)?.0)
            } else {
                None
            };
            Ok((main, seconds, alternate))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (k, &spot) in cfg.spots.iter().enumerate() {
        let mut prev: Option<f64> = None;
        for (main, seconds, alternate) in &runs {
            let value = main.prices[k].1;
            rows.push(ConvergenceRow {
                spot,
                intervals: main.grid.intervals(),
                time_steps: main.grid.time_steps(),
                value,
                diff: prev.map(|p| value - p),
                psor_max: main.report.max_psor_iterations,
                iterations: main.report.iterations,
                seconds: *seconds,
                alternate: alternate.as_ref().map(|a| a.prices[k].1),
            });
            prev = Some(value);
        }
    }
    Ok(rows)
}

/// Grid-doubling levels ending at the configured `L`, coarsest first.
pub fn doubling_levels(cfg: &RunConfig, count: usize) -> Vec<(usize, Option<usize>)> {
    let l = cfg.grid.intervals;
    let m = match cfg.grid.dt_rule {
        DtRule::Steps(m) => Some(m),
        DtRule::Named(_) => None,
    };
    (0..count)
        .rev()
        .map(|k| (l >> k, m.map(|m| (m >> k).max(1))))
        .filter(|&(l, _)| l >= 4)
        .collect()
}

/// The convergence table: PSOR on every level, Brennan-Schwartz alongside.
pub fn run_convergence_table(def: &TableDef, overrides: &SchemeOverrides) -> Result<Vec<ConvergenceRow>> {
    let row = def
        .rows
        .first()
        .ok_or_else(|| Error::InvalidSpec(format!("table {} has no rows", def.id)))?;
    let mut cfg = def.row_config(row)?;
    overrides.apply(&mut cfg);
    let levels: Vec<_> = def.levels.iter().map(|&(l, m)| (l, Some(m))).collect();
    convergence_study(&cfg, &levels, true)
}
