//! Fixed-point pricing loop.
//!
//! Starting from `u_0 = g` on the whole lattice, each iterate `u_n` solves a
//! diffusion-only complementarity problem backward in time whose source term
//! is the jump operator applied to `u_{n-1}`. For the implicit scheme the
//! iterates increase monotonically and converge geometrically with factor at
//! most `(1 - eta^M) lambda / (lambda + r)`, `eta = 1 / (1 + (lambda + r) dt)`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{boundary_values, Grid};
use crate::jumpconv::{discretize_density_with, BoundaryExtension, JumpOperator, DEFAULT_MIN_MASS};
use crate::lcp::{
    optimal_relaxation, solve_lcp_brennan_schwartz, solve_lcp_psor, solve_linear, ContactSide,
    PsorSettings, SchemeCoefficients, TridiagonalLcp,
};
use crate::model::{ModelParams, OptionSpec, Payoff};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Psor,
    BrennanSchwartz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// 1 is fully implicit, 1/2 is Crank-Nicolson.
    pub theta: f64,
    pub solver: SolverKind,
    pub psor_tol: f64,
    pub psor_max_iter: usize,
    pub omega_override: Option<f64>,
    /// Sup-norm change over the whole lattice that ends the fixed-point loop.
    pub global_tol: f64,
    pub max_global_iters: usize,
    pub min_jump_mass: f64,
    /// Evaluate the complementarity residual after every time step.
    pub check_residual: bool,
    /// Keep every iterate surface in the result.
    pub keep_iterates: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            solver: SolverKind::Psor,
            psor_tol: 1e-8,
            psor_max_iter: 10_000,
            omega_override: None,
            global_tol: 1e-6,
            max_global_iters: 50,
            min_jump_mass: DEFAULT_MIN_MASS,
            check_residual: false,
            keep_iterates: false,
        }
    }
}

/// Values on the full lattice for one iterate, stored by time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    /// `slices[m][l]`.
    pub slices: Vec<Vec<f64>>,
    pub iterate: usize,
}

impl Surface {
    /// `u_0`: the payoff repeated at every time node.
    pub fn constant(payoff: &[f64], time_steps: usize) -> Self {
        Self { slices: vec![payoff.to_vec(); time_steps + 1], iterate: 0 }
    }

    pub fn at(&self, l: usize, m: usize) -> f64 {
        self.slices[m][l]
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        &self.slices[m]
    }

    /// `max_{l,m} |self - other|`.
    pub fn sup_distance(&self, other: &Surface) -> f64 {
        self.slices
            .iter()
            .zip(&other.slices)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// `min_{l,m} (self - other)`.
    pub fn min_difference(&self, other: &Surface) -> f64 {
        self.slices
            .iter()
            .zip(&other.slices)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub max_psor_iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationReport {
    pub iterations: usize,
    /// `||u_n - u_{n-1}||_inf` for n = 1, 2, ...
    pub sup_diffs: Vec<f64>,
    /// Continuous-time bound at t = 0 for each n.
    pub analytic_bounds: Vec<f64>,
    /// Discrete rate bound with `E_0 = ||u - u_0||_inf` measured at the end.
    pub rate_bounds: Vec<f64>,
    pub max_psor_iterations: usize,
    pub max_residual: f64,
    pub seconds: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PriceResult {
    pub prices: Vec<(f64, f64)>,
    pub surface: Surface,
    /// Exercise boundary `s(t_m)` for American puts, empty otherwise.
    pub boundary: Vec<f64>,
    pub report: IterationReport,
    pub grid: Grid,
    pub coefficients: SchemeCoefficients,
    /// Populated when [`EngineConfig::keep_iterates`] is set; includes `u_0`.
    pub iterates: Vec<Surface>,
}

impl PriceResult {
    pub fn price_at(&self, spot: f64) -> Result<f64> {
        spot_price(&self.surface, &self.grid, spot)
    }
}

pub fn spot_price(surface: &Surface, grid: &Grid, spot: f64) -> Result<f64> {
    if !(spot > 0.0) {
        return Err(Error::InvalidParameter(format!("spot = {spot} must be positive")));
    }
    grid.interpolate(surface.slice(0), spot.ln()).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "spot {spot} outside grid [{:.4}, {:.4}]",
            grid.x_min().exp(),
            grid.x_max().exp()
        ))
    })
}

/// Everything fixed across iterates: coefficients, jump operator, boundary data.
#[derive(Debug)]
pub struct Pricer<'a> {
    pub model: ModelParams,
    pub option: OptionSpec,
    pub grid: &'a Grid,
    pub config: EngineConfig,
    pub coefficients: SchemeCoefficients,
    operator: Option<JumpOperator>,
    extension: BoundaryExtension,
    dirichlet: Vec<(f64, f64)>,
    omega: f64,
}

impl<'a> Pricer<'a> {
    pub fn new(model: &ModelParams, option: &OptionSpec, grid: &'a Grid, config: &EngineConfig) -> Result<Self> {
        model.validate()?;
        option.validate()?;
        if !(config.global_tol > 0.0) || !(config.psor_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        let coefficients = SchemeCoefficients::from_steps(model, grid.dt, grid.dx, config.theta)?;
        let operator = if model.lambda > 0.0 {
            let weights = discretize_density_with(&model.jump, grid, config.min_jump_mass)?;
            Some(JumpOperator::new(weights, grid)?)
        } else {
            None
        };
        let extension = BoundaryExtension::for_contract(option, model);
        let dirichlet = grid.t.iter().map(|&t| boundary_values(option, model, grid, t)).collect();
        let omega = config.omega_override.unwrap_or_else(|| optimal_relaxation(&coefficients));
        Ok(Self {
            model: *model,
            option: *option,
            grid,
            config: config.clone(),
            coefficients,
            operator,
            extension,
            dirichlet,
            omega,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn initial_surface(&self) -> Surface {
        Surface::constant(&self.grid.payoff, self.grid.time_steps())
    }

    fn jump_terms(&self, prev: &Surface) -> Result<Vec<Vec<f64>>> {
        match &self.operator {
            Some(op) => self
                .grid
                .t
                .iter()
                .enumerate()
                .map(|(m, &t)| op.apply(prev.slice(m), &self.extension, t))
                .collect(),
            None => Ok(vec![vec![0.0; self.grid.x.len()]; self.grid.t.len()]),
        }
    }

    /// Computes `u_n` from `u_{n-1}`.
    pub fn backward_sweep(&self, prev: &Surface) -> Result<(Surface, SweepStats)> {
        let grid = self.grid;
        let l_count = grid.intervals();
        let m_count = grid.time_steps();
        if prev.slices.len() != m_count + 1 || prev.slices.iter().any(|s| s.len() != l_count + 1) {
            return Err(Error::DimensionMismatch {
                expected: (m_count + 1) * (l_count + 1),
                got: prev.slices.iter().map(Vec::len).sum(),
            });
        }
        let jump = self.jump_terms(prev)?;
        let c = &self.coefficients;
        let th = c.theta;
        let ex = 1.0 - th;
        let lam_dt = self.model.lambda * grid.dt;
        let interior = l_count - 1;
        let matrix = c.implicit_matrix(interior);
        let american = self.option.is_american();
        let side = match self.option.payoff {
            Payoff::Put { .. } => ContactSide::Low,
            Payoff::Call { .. } => ContactSide::High,
        };
        let obstacle = american.then(|| grid.payoff[1..l_count].to_vec());
        let psor = PsorSettings {
            omega: self.omega,
            tol: self.config.psor_tol,
            max_iter: self.config.psor_max_iter,
        };

        let mut slices = vec![Vec::new(); m_count + 1];
        slices[m_count] = grid.payoff.clone();
        let mut stats = SweepStats::default();
        for m in (0..m_count).rev() {
            let next = &slices[m + 1];
            let (left, right) = self.dirichlet[m];
            let mut rhs: Vec<f64> = (1..l_count)
                .map(|l| {
                    ex * c.p_minus * next[l - 1]
                        + (1.0 - ex * c.p_zero) * next[l]
                        + ex * c.p_plus * next[l + 1]
                        + lam_dt * (ex * jump[m + 1][l] + th * jump[m][l])
                })
                .collect();
            rhs[0] += th * c.p_minus * left;
            rhs[interior - 1] += th * c.p_plus * right;

            let sys = TridiagonalLcp { matrix: matrix.clone(), rhs, obstacle: obstacle.clone() };
            let solution = match (self.config.solver, american) {
                (SolverKind::Psor, _) => {
                    let (u, iters) = solve_lcp_psor(&sys, &next[1..l_count], &psor)?;
                    stats.max_psor_iterations = stats.max_psor_iterations.max(iters);
                    u
                }
                (SolverKind::BrennanSchwartz, true) => solve_lcp_brennan_schwartz(&sys, side)?,
                (SolverKind::BrennanSchwartz, false) => solve_linear(&sys.matrix, &sys.rhs)?,
            };
            if self.config.check_residual {
                stats.max_residual = stats.max_residual.max(sys.complementarity_residual(&solution));
            }
            let mut slice = Vec::with_capacity(l_count + 1);
            slice.push(left);
            slice.extend_from_slice(&solution);
            slice.push(right);
            slices[m] = slice;
        }
        Ok((Surface { slices, iterate: prev.iterate + 1 }, stats))
    }

    pub fn run(&self, spots: &[f64]) -> Result<PriceResult> {
        let mut prev = self.initial_surface();
        let u0 = prev.clone();
        let mut iterates = Vec::new();
        if self.config.keep_iterates {
            iterates.push(prev.clone());
        }
        let mut report = IterationReport::default();
        while report.iterations < self.config.max_global_iters {
            let start = Instant::now();
            let (next, stats) = self.backward_sweep(&prev)?;
            report.seconds.push(start.elapsed().as_secs_f64());
            report.iterations += 1;
            report.max_psor_iterations = report.max_psor_iterations.max(stats.max_psor_iterations);
            report.max_residual = report.max_residual.max(stats.max_residual);
            let diff = next.sup_distance(&prev);
            report.sup_diffs.push(diff);
            if self.config.keep_iterates {
                iterates.push(next.clone());
            }
            prev = next;
            if diff <= self.config.global_tol {
                report.converged = true;
                break;
            }
        }
        if !report.converged {
            return Err(Error::NoConvergence {
                what: "global fixed-point iteration",
                iterations: report.iterations,
                last_change: report.sup_diffs.last().copied().unwrap_or(f64::NAN),
                trace: report.sup_diffs,
            });
        }

        let strike = self.option.strike();
        let e0 = prev.sup_distance(&u0);
        for n in 1..=report.iterations {
            report.analytic_bounds.push(analytic_iteration_bound(
                &self.model,
                strike,
                self.option.maturity,
                0.0,
                n,
            ));
            report.rate_bounds.push(discrete_rate_bound(&self.model, self.grid, n, e0));
        }

        let prices = spots
            .iter()
            .map(|&s| spot_price(&prev, self.grid, s).map(|p| (s, p)))
            .collect::<Result<Vec<_>>>()?;
        let boundary = match (self.option.payoff, self.option.is_american()) {
            (Payoff::Put { .. }, true) => {
                extract_free_boundary(&prev, self.grid, strike, 1e-6 * strike)
            }
            _ => Vec::new(),
        };
        Ok(PriceResult {
            prices,
            surface: prev,
            boundary,
            report,
            grid: self.grid.clone(),
            coefficients: self.coefficients,
            iterates,
        })
    }
}

/// One backward sweep: `u_n` from `u_{n-1}`.
pub fn backward_sweep(
    prev: &Surface,
    model: &ModelParams,
    option: &OptionSpec,
    grid: &Grid,
    config: &EngineConfig,
) -> Result<Surface> {
    Pricer::new(model, option, grid, config)?.backward_sweep(prev).map(|(s, _)| s)
}

pub fn iterate_to_fixed_point(
    model: &ModelParams,
    option: &OptionSpec,
    grid: &Grid,
    config: &EngineConfig,
    spots: &[f64],
) -> Result<PriceResult> {
    Pricer::new(model, option, grid, config)?.run(spots)
}

/// `K (1 - e^{-(r + lambda)(T - t)})^n (lambda / (lambda + r))^n`.
pub fn analytic_iteration_bound(m: &ModelParams, strike: f64, maturity: f64, t: f64, n: usize) -> f64 {
    let rate = m.r + m.lambda;
    let share = if m.lambda > 0.0 { m.lambda / rate } else { 0.0 };
    let factor = (1.0 - (-rate * (maturity - t)).exp()) * share;
    strike * factor.powi(n as i32)
}

/// `eta = 1 / (1 + (lambda + r) dt)`.
pub fn discount_eta(m: &ModelParams, dt: f64) -> f64 {
    1.0 / (1.0 + (m.lambda + m.r) * dt)
}

/// Per-iteration contraction factor `(1 - eta^M) lambda / (lambda + r)`.
pub fn discrete_rate_factor(m: &ModelParams, grid: &Grid) -> f64 {
    if m.lambda == 0.0 {
        return 0.0;
    }
    let eta = discount_eta(m, grid.dt);
    (1.0 - eta.powi(grid.time_steps() as i32)) * m.lambda / (m.lambda + m.r)
}

/// `(1 - eta^M)^n (lambda / (lambda + r))^n E_0`.
pub fn discrete_rate_bound(m: &ModelParams, grid: &Grid, n: usize, e0: f64) -> f64 {
    if n == 0 {
        return e0;
    }
    discrete_rate_factor(m, grid).powi(n as i32) * e0
}

/// Exercise boundary of a put surface: for each time node, `e^{x_l}` at the
/// top of the contiguous contact set `{0..=l : |u - g| <= tol}`, capped at
/// the strike.
pub fn extract_free_boundary(surface: &Surface, grid: &Grid, strike: f64, tol: f64) -> Vec<f64> {
    surface
        .slices
        .iter()
        .map(|slice| {
            let top = slice
                .iter()
                .zip(&grid.payoff)
                .take_while(|(u, g)| (*u - *g).abs() <= tol)
                .count();
            match top {
                0 => grid.x_min().exp(),
                n if n >= grid.x.len() => strike.min(grid.x_max().exp()),
                n => grid.x[n - 1].exp().min(strike),
            }
        })
        .collect()
}
