//! Log-price, time, and jump-size meshes.
//!
//! Space nodes `x_l = x_min + l dx`, time nodes `t_m = m dt`, and jump
//! nodes `z_j = z_min + j dz` with `dx = alpha * dz`. The jump mesh is
//! anchored on integer multiples of `dz`, so every shifted point `x_l + z_j`
//! lands on a uniform fine lattice that contains the space nodes.

use crate::error::{Error, Result};
use crate::jumpconv::BoundaryExtension;
use crate::model::{Barrier, JumpDistribution, ModelParams, OptionSpec, Payoff};

/// How the number of time steps is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSteps {
    /// `M = max(1, round(T / dx))`, then `dt = T / M`.
    EqualDx,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Defaults to `ln(K / 4)`. Overridden by `ln(H)` for barrier contracts.
    pub x_min: Option<f64>,
    /// Defaults to `ln(4 K)`.
    pub x_max: Option<f64>,
    /// Number of space intervals `L`.
    pub intervals: usize,
    pub time_steps: TimeSteps,
    /// Space-to-jump refinement ratio: `dx = alpha * dz`.
    pub alpha: usize,
    /// Width of the retained jump-size interval, in jump standard deviations.
    pub z_margin: f64,
}

impl GridSpec {
    pub fn new(intervals: usize) -> Self {
        Self {
            x_min: None,
            x_max: None,
            intervals,
            time_steps: TimeSteps::EqualDx,
            alpha: 1,
            z_margin: 4.0,
        }
    }

    pub fn with_bounds(mut self, x_min: f64, x_max: f64) -> Self {
        self.x_min = Some(x_min);
        self.x_max = Some(x_max);
        self
    }

    pub fn with_time_steps(mut self, m: usize) -> Self {
        self.time_steps = TimeSteps::Fixed(m);
        self
    }

    pub fn with_alpha(mut self, alpha: usize) -> Self {
        self.alpha = alpha;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub x: Vec<f64>,
    pub dx: f64,
    pub t: Vec<f64>,
    pub dt: f64,
    /// Jump-size nodes `z_0 .. z_J`.
    pub z: Vec<f64>,
    pub dz: f64,
    pub alpha: usize,
    /// `z_min = z_offset * dz`.
    pub z_offset: i64,
    pub payoff: Vec<f64>,
    pub maturity: f64,
}

impl Grid {
    pub fn intervals(&self) -> usize {
        self.x.len() - 1
    }

    pub fn time_steps(&self) -> usize {
        self.t.len() - 1
    }

    /// Number of jump sub-intervals `J`.
    pub fn jump_intervals(&self) -> usize {
        self.z.len() - 1
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn z_min(&self) -> f64 {
        self.z[0]
    }

    pub fn z_max(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    /// Range of shifted points `x + z` visited by the jump operator.
    pub fn reach(&self) -> (f64, f64) {
        (self.x_min() + self.z_min(), self.x_max() + self.z_max())
    }

    /// Index of the node equal to `x`, if any (within 1e-12 of a cell).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let q = (x - self.x_min()) / self.dx;
        let l = q.round();
        if (q - l).abs() < 1e-9 && l >= 0.0 && (l as usize) < self.x.len() {
            Some(l as usize)
        } else {
            None
        }
    }

    /// Linear interpolation of `slice` (one value per space node) at `x`.
    /// Returns `None` outside `[x_min, x_max]`.
    pub fn interpolate(&self, slice: &[f64], x: f64) -> Option<f64> {
        let lo = self.x_min();
        let hi = self.x_max();
        if x < lo || x > hi {
            return None;
        }
        if let Some(l) = self.node_index(x) {
            return Some(slice[l]);
        }
        let q = (x - lo) / self.dx;
        let l = (q.floor() as usize).min(self.intervals() - 1);
        let w = q - l as f64;
        Some((1.0 - w) * slice[l] + w * slice[l + 1])
    }
}

pub fn build_grid(spec: &GridSpec, opt: &OptionSpec, jump: &JumpDistribution) -> Result<Grid> {
    opt.validate()?;
    jump.validate()?;
    let strike = opt.strike();
    let log_k = strike.ln();
    if spec.intervals < 4 {
        return Err(Error::InvalidSpec(format!("L = {} must be at least 4", spec.intervals)));
    }
    if spec.alpha < 1 {
        return Err(Error::InvalidSpec("alpha must be a positive integer".into()));
    }
    if !(spec.z_margin > 0.0) {
        return Err(Error::InvalidSpec(format!("z_margin = {} must be positive", spec.z_margin)));
    }
    if let TimeSteps::Fixed(0) = spec.time_steps {
        return Err(Error::InvalidSpec("M must be at least 1".into()));
    }

    let mut x_min = spec.x_min.unwrap_or((strike / 4.0).ln());
    let x_max = spec.x_max.unwrap_or((4.0 * strike).ln());
    if let Some(Barrier::DownAndOut { level, .. }) = opt.barrier {
        let log_h = level.ln();
        if log_h >= x_max {
            return Err(Error::InvalidSpec(format!(
                "barrier ln(H) = {log_h:.6} must be below x_max = {x_max:.6}"
            )));
        }
        x_min = log_h;
    }
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::InvalidSpec(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
    }
    if log_k < x_min || log_k > x_max {
        return Err(Error::InvalidSpec(format!(
            "ln(K) = {log_k:.6} outside [{x_min:.6}, {x_max:.6}]"
        )));
    }

    let l_count = spec.intervals;
    let dx = (x_max - x_min) / l_count as f64;
    let mut x: Vec<f64> = (0..=l_count).map(|l| x_min + l as f64 * dx).collect();
    x[l_count] = x_max;

    let m_count = match spec.time_steps {
        TimeSteps::EqualDx => ((opt.maturity / dx).round() as usize).max(1),
        TimeSteps::Fixed(m) => m,
    };
    let dt = opt.maturity / m_count as f64;
    let mut t: Vec<f64> = (0..=m_count).map(|m| m as f64 * dt).collect();
    t[m_count] = opt.maturity;

    let dz = dx / spec.alpha as f64;
    let (lo, hi) = jump.truncation_interval(spec.z_margin);
    let j_lo = (lo / dz - 1e-9).floor() as i64;
    let mut j_hi = (hi / dz + 1e-9).ceil() as i64;
    if j_hi <= j_lo {
        j_hi = j_lo + 1;
    }
    let z: Vec<f64> = (j_lo..=j_hi).map(|j| j as f64 * dz).collect();

    let mut grid = Grid {
        x,
        dx,
        t,
        dt,
        z,
        dz,
        alpha: spec.alpha,
        z_offset: j_lo,
        payoff: Vec::new(),
        maturity: opt.maturity,
    };
    grid.payoff = payoff_vector(opt, &grid);
    Ok(grid)
}

/// Terminal payoff `g^l` at every space node. Nodes at or below a
/// knock-out barrier carry the rebate.
pub fn payoff_vector(opt: &OptionSpec, grid: &Grid) -> Vec<f64> {
    let barrier = opt.barrier.map(|Barrier::DownAndOut { level, rebate }| (level.ln(), rebate));
    grid.x
        .iter()
        .map(|&x| match barrier {
            Some((log_h, rebate)) if x <= log_h + 1e-12 => rebate,
            _ => opt.payoff.value(x.exp()),
        })
        .collect()
}

/// Dirichlet values `(left, right)` at `x_min` and `x_max` at time `t`.
pub fn boundary_values(opt: &OptionSpec, m: &ModelParams, grid: &Grid, t: f64) -> (f64, f64) {
    let ext = BoundaryExtension::for_contract(opt, m);
    (ext.left(grid.x_min(), t), ext.right(grid.x_max(), t))
}

/// Default log-price bounds `[ln(K/4), ln(4K)]`.
pub fn default_bounds(payoff: &Payoff) -> (f64, f64) {
    let k = payoff.strike();
    ((k / 4.0).ln(), (4.0 * k).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExerciseStyle, JumpDistribution};

    fn put() -> OptionSpec {
        OptionSpec::american_put(100.0, 0.25).unwrap()
    }

    fn kou() -> JumpDistribution {
        JumpDistribution::double_exponential(0.6, 25.0, 25.0).unwrap()
    }

    fn barrier_call(h: f64) -> OptionSpec {
        OptionSpec::new(
            ExerciseStyle::European,
            Payoff::Call { strike: 110.0 },
            1.0,
            Some(Barrier::DownAndOut { level: h, rebate: 1.0 }),
        )
        .unwrap()
    }

    #[test]
    fn equal_dx_time_steps() {
        let spec = GridSpec::new(64).with_bounds(50f64.ln(), 200f64.ln());
        let g = build_grid(&spec, &put(), &kou()).unwrap();
        assert!((g.dx - 0.021661).abs() < 1e-6);
        assert_eq!(g.time_steps(), 12);
        assert!((g.dt * 12.0 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn alpha_one_gives_equal_steps() {
        let g = build_grid(&GridSpec::new(32), &put(), &kou()).unwrap();
        assert_eq!(g.dz, g.dx);
        let g = build_grid(&GridSpec::new(32).with_alpha(4), &put(), &kou()).unwrap();
        assert!((g.dx - 4.0 * g.dz).abs() < 1e-15);
    }

    #[test]
    fn gaussian_reach_covers_table_interval() {
        let j = JumpDistribution::gaussian(-0.9, 0.45).unwrap();
        let g = build_grid(&GridSpec::new(128), &put(), &j).unwrap();
        let (lo, hi) = g.reach();
        assert!(lo <= g.x_min() - 0.9 - 1.8);
        assert!(hi >= g.x_max() - 0.9 + 1.8);
        assert!((g.jump_intervals() as f64 * g.dz - (g.z_max() - g.z_min())).abs() < 1e-12);
    }

    #[test]
    fn node_counts() {
        let g = build_grid(&GridSpec::new(64).with_alpha(2), &put(), &kou()).unwrap();
        assert_eq!(g.x.len(), 65);
        assert_eq!(g.z.len(), g.jump_intervals() + 1);
        assert!(g.z.contains(&0.0));
    }

    #[test]
    fn payoff_examples() {
        let spec = GridSpec::new(64).with_bounds(50f64.ln(), 200f64.ln());
        let g = build_grid(&spec, &put(), &kou()).unwrap();
        let atm = g.node_index(100f64.ln()).unwrap();
        assert!(g.payoff[atm].abs() < 1e-12);
        assert!((g.payoff[0] - 50.0).abs() < 1e-12);

        let mut g2 = g.clone();
        g2.x = vec![90f64.ln()];
        assert!((payoff_vector(&put(), &g2)[0] - 10.0).abs() < 1e-12);

        let opt = barrier_call(85.0);
        let mut g3 = build_grid(&GridSpec::new(64), &opt, &kou()).unwrap();
        g3.x = vec![80f64.ln(), 85f64.ln(), 120f64.ln()];
        let p = payoff_vector(&opt, &g3);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[1], 1.0);
        assert!((p[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn barrier_snaps_to_node() {
        let opt = barrier_call(95.0);
        let g = build_grid(&GridSpec::new(64), &opt, &kou()).unwrap();
        assert_eq!(g.x[0], 95f64.ln());
    }

    #[test]
    fn invalid_specs() {
        let spec = GridSpec::new(64).with_bounds(110f64.ln(), 200f64.ln());
        assert!(matches!(build_grid(&spec, &put(), &kou()), Err(Error::InvalidSpec(_))));
        let spec = GridSpec::new(3);
        assert!(build_grid(&spec, &put(), &kou()).is_err());
        let spec = GridSpec::new(64).with_bounds(50f64.ln(), 80f64.ln());
        assert!(build_grid(&spec, &barrier_call(85.0), &kou()).is_err());
        let spec = GridSpec::new(64).with_time_steps(0);
        assert!(build_grid(&spec, &put(), &kou()).is_err());
    }

    #[test]
    fn boundary_value_examples() {
        let m = ModelParams::new(0.05, 0.2, 3.0, kou()).unwrap();
        let spec = GridSpec::new(64).with_bounds(50f64.ln(), 200f64.ln());
        let g = build_grid(&spec, &put(), &kou()).unwrap();
        let (l, r) = boundary_values(&put(), &m, &g, 0.1);
        assert!((l - 50.0).abs() < 1e-12);
        assert_eq!(r, 0.0);

        let call = OptionSpec::new(ExerciseStyle::European, Payoff::Call { strike: 100.0 }, 0.25, None)
            .unwrap();
        let g = build_grid(&spec, &call, &kou()).unwrap();
        let (l, r) = boundary_values(&call, &m, &g, 0.25);
        assert_eq!(l, 0.0);
        assert!((r - 100.0).abs() < 1e-9);

        let opt = barrier_call(85.0);
        let g = build_grid(&GridSpec::new(64), &opt, &kou()).unwrap();
        for t in [0.0, 0.5, 1.0] {
            assert_eq!(boundary_values(&opt, &m, &g, t).0, 1.0);
        }
    }
}
