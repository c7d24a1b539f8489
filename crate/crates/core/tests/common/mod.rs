//! Helpers shared by the engine integration tests and the acceptance suite.
#![allow(dead_code)]

use iterjump::engine::discrete_rate_factor;
use iterjump::*;
use rand::prelude::*;

/// A randomized put contract on its own grid.
#[derive(Debug, Clone)]
pub struct Draw {
    pub model: ModelParams,
    pub option: OptionSpec,
    pub grid: Grid,
}

/// Random model, put contract and grid; `None` when the draw is rejected
/// by the mesh checks (negative scheme weights or truncated jump mass).
pub fn random_draw(rng: &mut StdRng, theta: f64) -> Option<Draw> {
    let jump = if rng.gen_bool(0.5) {
        JumpDistribution::double_exponential(rng.gen_range(0.2..0.8), rng.gen_range(3.0..50.0), rng.gen_range(3.0..50.0))
            .ok()?
    } else {
        JumpDistribution::gaussian(rng.gen_range(-0.5..0.3), rng.gen_range(0.05..0.4)).ok()?
    };
    let model = ModelParams::new(
        rng.gen_range(0.01..0.1),
        rng.gen_range(0.15..0.4),
        rng.gen_range(0.1..3.0),
        jump,
    )
    .ok()?;
    let style = if rng.gen_bool(0.75) { ExerciseStyle::American } else { ExerciseStyle::European };
    let option = OptionSpec::new(style, Payoff::Put { strike: 100.0 }, rng.gen_range(0.1..1.0), None).ok()?;
    let l = *[16usize, 32, 64].choose(rng)?;
    let grid = build_grid(&GridSpec::new(l), &option, &jump).ok()?;
    // Reject meshes the engine refuses.
    Pricer::new(&model, &option, &grid, &EngineConfig { theta, ..EngineConfig::default() }).ok()?;
    Some(Draw { model, option, grid })
}

/// Measurements of one fully implicit run against the convergence theory.
#[derive(Debug, Clone, Copy)]
pub struct TheoryChecks {
    /// `min (u_{n+1} - u_n)` over all iterates and nodes; only meaningful for
    /// American contracts, where `u_0 = g` lies below `u_1`.
    pub min_increment: f64,
    /// Largest lattice value over all iterates.
    pub max_value: f64,
    /// Smallest `u - g` over the final lattice, American only.
    pub min_obstacle_gap: f64,
    /// `max_n (d_{n+1} / d_n) - (1 - eta^M) lambda / (lambda + r)`.
    pub contraction_excess: f64,
    /// `max_n E_n - discrete_rate_bound(n, E_0)`, with the converged lattice
    /// standing in for the fixed point.
    pub rate_excess: f64,
    pub iterations: usize,
}

pub fn theory_checks(d: &Draw) -> Result<TheoryChecks> {
    let config = EngineConfig {
        theta: 1.0,
        solver: SolverKind::BrennanSchwartz,
        global_tol: 1e-11,
        max_global_iters: 5000,
        keep_iterates: true,
        ..EngineConfig::default()
    };
    let result = iterate_to_fixed_point(&d.model, &d.option, &d.grid, &config, &[])?;
    let its = &result.iterates;
    let mut min_increment = f64::INFINITY;
    let mut max_value = f64::NEG_INFINITY;
    for w in its.windows(2) {
        min_increment = min_increment.min(w[1].min_difference(&w[0]));
    }
    for s in its {
        for v in s.slices.iter().flatten() {
            max_value = max_value.max(*v);
        }
    }
    let mut min_obstacle_gap = f64::INFINITY;
    if d.option.is_american() {
        for slice in &result.surface.slices {
            for (u, g) in slice.iter().zip(&d.grid.payoff) {
                min_obstacle_gap = min_obstacle_gap.min(u - g);
            }
        }
    }

    let factor = discrete_rate_factor(&d.model, &d.grid);
    let diffs = &result.report.sup_diffs;
    let mut contraction_excess = f64::NEG_INFINITY;
    for w in diffs.windows(2) {
        // Ratios of differences at rounding level carry no information.
        if w[0] > 1e-9 {
            contraction_excess = contraction_excess.max(w[1] / w[0] - factor);
        }
    }

    let limit = &result.surface;
    let e0 = limit.sup_distance(&its[0]);
    let mut rate_excess = f64::NEG_INFINITY;
    for (n, s) in its.iter().enumerate() {
        let en = limit.sup_distance(s);
        rate_excess = rate_excess.max(en - discrete_rate_bound(&d.model, &d.grid, n, e0));
    }

    Ok(TheoryChecks {
        min_increment,
        max_value,
        min_obstacle_gap,
        contraction_excess,
        rate_excess,
        iterations: result.report.iterations,
    })
}

/// Largest complementarity residual over all steps of a PSOR run.
pub fn psor_residual(d: &Draw, theta: f64) -> Result<f64> {
    let config = EngineConfig { theta, check_residual: true, ..EngineConfig::default() };
    Ok(iterate_to_fixed_point(&d.model, &d.option, &d.grid, &config, &[])?.report.max_residual)
}

/// Jump-free put on `grid`, written independently of the engine: fully
/// implicit steps, Dirichlet data `K - e^x` (American) or `K e^{-r tau} - e^x`
/// (European) on the left and 0 on the right, obstacle handled by an
/// elimination from the right followed by a projected forward substitution.
pub fn reference_put_lattice(r: f64, sigma: f64, strike: f64, american: bool, grid: &Grid) -> Vec<f64> {
    let (dx, dt) = (grid.dx, grid.dt);
    let drift = r - 0.5 * sigma * sigma;
    let diff = 0.5 * sigma * sigma * dt / (dx * dx);
    let conv = 0.5 * drift * dt / dx;
    let (pm, pp) = (diff - conv, diff + conv);
    let diag = 1.0 + pm + pp + r * dt;
    let n = grid.x.len() - 2;
    let payoff: Vec<f64> = grid.x.iter().map(|x| (strike - x.exp()).max(0.0)).collect();
    let mut u = payoff.clone();
    for m in (0..grid.time_steps()).rev() {
        let tau = grid.maturity - grid.t[m];
        let left = if american {
            strike - grid.x[0].exp()
        } else {
            strike * (-r * tau).exp() - grid.x[0].exp()
        };
        let mut rhs: Vec<f64> = u[1..=n].to_vec();
        // Eliminate the super-diagonal from the last row up.
        let mut b = vec![diag; n];
        for i in (0..n - 1).rev() {
            let f = pp / b[i + 1];
            b[i] -= f * pm;
            rhs[i] += f * rhs[i + 1];
        }
        let mut next = vec![0.0; n + 2];
        next[0] = left;
        for i in 0..n {
            let v = (rhs[i] + pm * next[i]) / b[i];
            next[i + 1] = if american { v.max(payoff[i + 1]) } else { v };
        }
        u = next;
    }
    u
}
