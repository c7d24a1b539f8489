//! TOML run configuration.
//!
//! ```toml
//! spots = [90.0, 100.0, 110.0]
//! outputs = ["price", "boundary"]
//!
//! [model]
//! r = 0.05
//! sigma = 0.2
//! lambda = 3.0
//! jump = { law = "double-exponential", p = 0.6, eta1 = 25.0, eta2 = 25.0 }
//!
//! [option]
//! style = "american"
//! payoff = "put"
//! strike = 100.0
//! maturity = 0.25
//!
//! [grid]
//! intervals = 64
//! dt_rule = "equal-dx"   # or an explicit number of time steps
//!
//! [scheme]
//! solver = "psor"
//! ```

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, SolverKind};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, TimeSteps};
use crate::model::{Barrier, ExerciseStyle, JumpDistribution, ModelParams, OptionSpec, Payoff};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub option: OptionSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    pub spots: Vec<f64>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub jump: JumpSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpSection {
    DoubleExponential { p: f64, eta1: f64, eta2: f64 },
    Gaussian { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StyleName {
    American,
    European,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffName {
    Put,
    Call,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSection {
    pub style: StyleName,
    pub payoff: PayoffName,
    pub strike: f64,
    pub maturity: f64,
    /// Down-and-out barrier level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rebate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DtRuleName {
    #[serde(rename = "equal-dx")]
    EqualDx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtRule {
    Named(DtRuleName),
    Steps(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Log-price bounds. `s_min`/`s_max` give the same bounds in price units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(default = "default_intervals")]
    pub intervals: usize,
    #[serde(default = "default_alpha")]
    pub alpha: usize,
    #[serde(default = "default_z_margin")]
    pub z_margin: f64,
    #[serde(default = "default_dt_rule")]
    pub dt_rule: DtRule,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            x_min: None,
            x_max: None,
            s_min: None,
            s_max: None,
            intervals: default_intervals(),
            alpha: default_alpha(),
            z_margin: default_z_margin(),
            dt_rule: default_dt_rule(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    Psor,
    BrennanSchwartz,
}

impl SolverName {
    pub fn kind(self) -> SolverKind {
        match self {
            SolverName::Psor => SolverKind::Psor,
            SolverName::BrennanSchwartz => SolverKind::BrennanSchwartz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverName,
    #[serde(default = "default_psor_tol")]
    pub psor_tol: f64,
    #[serde(default = "default_global_tol")]
    pub global_tol: f64,
    #[serde(default = "default_max_global_iters")]
    pub max_global_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_override: Option<f64>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            theta: default_theta(),
            solver: default_solver(),
            psor_tol: default_psor_tol(),
            global_tol: default_global_tol(),
            max_global_iters: default_max_global_iters(),
            omega_override: None,
        }
    }
}

/// Command-line overrides of the scheme section.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SchemeOverrides {
    pub solver: Option<SolverName>,
    pub theta: Option<f64>,
}

impl SchemeOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.solver {
            cfg.scheme.solver = s;
        }
        if let Some(t) = self.theta {
            cfg.scheme.theta = t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Price,
    Surface,
    Boundary,
    Convergence,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Price]
}
fn default_intervals() -> usize {
    64
}
fn default_alpha() -> usize {
    1
}
fn default_z_margin() -> f64 {
    4.0
}
fn default_dt_rule() -> DtRule {
    DtRule::Named(DtRuleName::EqualDx)
}
fn default_theta() -> f64 {
    0.5
}
fn default_solver() -> SolverName {
    SolverName::Psor
}
fn default_psor_tol() -> f64 {
    1e-8
}
fn default_global_tol() -> f64 {
    1e-6
}
fn default_max_global_iters() -> usize {
    50
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    /// Re-check every invariant the domain types enforce.
    pub fn validate(&self) -> Result<()> {
        self.model_params()?;
        self.option_spec()?;
        self.engine_config()?;
        let g = &self.grid;
        if g.x_min.is_some() && g.s_min.is_some() || g.x_max.is_some() && g.s_max.is_some() {
            return Err(Error::InvalidSpec("give grid bounds as x_* or s_*, not both".into()));
        }
        for s in [g.s_min, g.s_max].into_iter().flatten() {
            if !(s > 0.0) {
                return Err(Error::InvalidSpec(format!("price bound must be positive, got {s}")));
            }
        }
        if matches!(g.dt_rule, DtRule::Steps(0)) {
            return Err(Error::InvalidSpec("dt_rule needs at least one time step".into()));
        }
        if !(g.z_margin > 0.0) {
            return Err(Error::InvalidSpec(format!("z_margin must be positive, got {}", g.z_margin)));
        }
        if self.spots.is_empty() {
            return Err(Error::InvalidSpec("at least one spot is required".into()));
        }
        if let Some(s) = self.spots.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::InvalidSpec(format!("spot must be positive, got {s}")));
        }
        // Bounds, barrier placement and spot coverage are checked by the grid builder.
        let grid = crate::grid::build_grid(&self.grid_spec(), &self.option_spec()?, &self.model_params()?.jump)?;
        for &s in &self.spots {
            let x = s.ln();
            if x < grid.x_min() - 1e-12 || x > grid.x_max() + 1e-12 {
                return Err(Error::InvalidSpec(format!(
                    "spot {s} outside grid [{:.4}, {:.4}]",
                    grid.x_min().exp(),
                    grid.x_max().exp()
                )));
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let jump = match self.model.jump {
            JumpSection::DoubleExponential { p, eta1, eta2 } => JumpDistribution::double_exponential(p, eta1, eta2)?,
            JumpSection::Gaussian { mu, sigma } => JumpDistribution::gaussian(mu, sigma)?,
        };
        ModelParams::new(self.model.r, self.model.sigma, self.model.lambda, jump)
    }

    pub fn option_spec(&self) -> Result<OptionSpec> {
        let o = &self.option;
        let style = match o.style {
            StyleName::American => ExerciseStyle::American,
            StyleName::European => ExerciseStyle::European,
        };
        let payoff = match o.payoff {
            PayoffName::Put => Payoff::Put { strike: o.strike },
            PayoffName::Call => Payoff::Call { strike: o.strike },
        };
        let barrier = match (o.barrier, o.rebate) {
            (Some(level), rebate) => Some(Barrier::DownAndOut { level, rebate: rebate.unwrap_or(0.0) }),
            (None, Some(_)) => return Err(Error::InvalidSpec("rebate given without a barrier".into())),
            (None, None) => None,
        };
        OptionSpec::new(style, payoff, o.maturity, barrier)
    }

    pub fn grid_spec(&self) -> GridSpec {
        let g = &self.grid;
        GridSpec {
            x_min: g.x_min.or(g.s_min.map(f64::ln)),
            x_max: g.x_max.or(g.s_max.map(f64::ln)),
            intervals: g.intervals,
            time_steps: match g.dt_rule {
                DtRule::Named(DtRuleName::EqualDx) => TimeSteps::EqualDx,
                DtRule::Steps(m) => TimeSteps::Fixed(m),
            },
            alpha: g.alpha,
            z_margin: g.z_margin,
        }
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        let s = &self.scheme;
        if !(0.0..=1.0).contains(&s.theta) {
            return Err(Error::InvalidSpec(format!("theta must lie in [0, 1], got {}", s.theta)));
        }
        if !(s.psor_tol > 0.0) || !(s.global_tol > 0.0) {
            return Err(Error::InvalidSpec("tolerances must be positive".into()));
        }
        if s.max_global_iters == 0 {
            return Err(Error::InvalidSpec("max_global_iters must be at least 1".into()));
        }
        if let Some(w) = s.omega_override {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::InvalidSpec(format!("omega must lie in (0, 2), got {w}")));
            }
        }
        Ok(EngineConfig {
            theta: s.theta,
            solver: s.solver.kind(),
            psor_tol: s.psor_tol,
            omega_override: s.omega_override,
            global_tol: s.global_tol,
            max_global_iters: s.max_global_iters,
            ..EngineConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW8: &str = r#"
spots = [100.0]

[model]
r = 0.05
sigma = 0.2
lambda = 3.0
jump = { law = "double-exponential", p = 0.6, eta1 = 25.0, eta2 = 25.0 }

[option]
style = "american"
payoff = "put"
strike = 100.0
maturity = 0.25
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_toml(ROW8).unwrap();
        assert_eq!(cfg.grid.intervals, 64);
        assert_eq!(cfg.grid.dt_rule, DtRule::Named(DtRuleName::EqualDx));
        assert_eq!(cfg.scheme.solver, SolverName::Psor);
        assert_eq!(cfg.outputs, vec![OutputKind::Price]);
        let e = cfg.engine_config().unwrap();
        assert_eq!((e.psor_tol, e.global_tol, e.theta), (1e-8, 1e-6, 0.5));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = ROW8.replace("strike = 100.0", "strike = 100.0\nstrke = 1.0");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn explicit_steps() {
        let text = format!("{ROW8}\n[grid]\nintervals = 128\ndt_rule = 58\n");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.grid_spec().time_steps, TimeSteps::Fixed(58));
    }

    #[test]
    fn invalid_model_rejected() {
        let text = ROW8.replace("eta1 = 25.0", "eta1 = 0.5");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn spot_outside_grid_rejected() {
        let text = ROW8.replace("spots = [100.0]", "spots = [1000.0]");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::from_toml(ROW8).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
