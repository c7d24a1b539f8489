//! Theta-scheme coefficients and tridiagonal complementarity solvers.
//!
//! Each time step of the backward sweep produces, on the interior nodes,
//!
//!   A u - b >= 0,   u >= g,   (A u - b) . (u - g) = 0
//!
//! with `A = tridiag(-theta p_-, 1 + theta p_0, -theta p_+)`. `A` is an
//! M-matrix whenever `p_-` and `p_+` are positive.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeCoefficients {
    pub p_minus: f64,
    pub p_plus: f64,
    pub p_zero: f64,
    pub theta: f64,
}

impl SchemeCoefficients {
    pub fn from_steps(m: &ModelParams, dt: f64, dx: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta = {theta} must lie in [0, 1]")));
        }
        let diffusion = 0.5 * m.sigma * m.sigma * dt / (dx * dx);
        let convection = 0.5 * (m.drift() - 0.5 * m.sigma * m.sigma) * dt / dx;
        let p_minus = diffusion - convection;
        let p_plus = diffusion + convection;
        if !(p_minus > 0.0 && p_plus > 0.0) {
            return Err(Error::MeshTooCoarse { p_minus, p_plus });
        }
        let p_zero = p_minus + p_plus + (m.r + m.lambda) * dt;
        Ok(Self { p_minus, p_plus, p_zero, theta })
    }

    /// Implicit-side matrix for `n` interior nodes.
    pub fn implicit_matrix(&self, n: usize) -> Tridiagonal {
        let th = self.theta;
        Tridiagonal {
            sub: vec![-th * self.p_minus; n],
            diag: vec![1.0 + th * self.p_zero; n],
            sup: vec![-th * self.p_plus; n],
        }
    }

    /// `||D^{-1}(A - D)||_inf` for the implicit matrix.
    pub fn jacobi_norm(&self) -> f64 {
        self.theta * (self.p_plus + self.p_minus) / (1.0 + self.theta * self.p_zero)
    }
}

pub fn assemble_coefficients(m: &ModelParams, grid: &Grid, theta: f64) -> Result<SchemeCoefficients> {
    SchemeCoefficients::from_steps(m, grid.dt, grid.dx, theta)
}

/// Over-relaxation factor `2 / (1 + sqrt(1 - ||J||^2))`.
pub fn optimal_relaxation(c: &SchemeCoefficients) -> f64 {
    let j = c.jacobi_norm();
    2.0 / (1.0 + (1.0 - j * j).sqrt())
}

/// Three bands of a tridiagonal matrix. `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * u[i];
                if i > 0 {
                    v += self.sub[i] * u[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * u[i + 1];
                }
                v
            })
            .collect()
    }

    fn check_m_matrix(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            let sub = if i > 0 { self.sub[i] } else { 0.0 };
            let sup = if i + 1 < n { self.sup[i] } else { 0.0 };
            if !(self.diag[i] > 0.0) || sub > 0.0 || sup > 0.0 {
                return Err(Error::InvalidStructure { row: i });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalLcp {
    pub matrix: Tridiagonal,
    pub rhs: Vec<f64>,
    /// `None` for an unconstrained (linear) step.
    pub obstacle: Option<Vec<f64>>,
}

impl TridiagonalLcp {
    fn check_dims(&self) -> Result<()> {
        let n = self.matrix.len();
        for len in [self.matrix.sub.len(), self.matrix.sup.len(), self.rhs.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if let Some(g) = &self.obstacle {
            if g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.len() });
            }
        }
        Ok(())
    }

    /// `max_i |min((A u - b)_i, u_i - g_i)|`; just `||A u - b||_inf` without obstacle.
    pub fn complementarity_residual(&self, u: &[f64]) -> f64 {
        let au = self.matrix.mul(u);
        au.iter()
            .zip(&self.rhs)
            .enumerate()
            .map(|(i, (a, b))| {
                let r = a - b;
                match &self.obstacle {
                    Some(g) => r.min(u[i] - g[i]).abs(),
                    None => r.abs(),
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorSettings {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl PsorSettings {
    pub fn new(omega: f64) -> Self {
        Self { omega, tol: 1e-8, max_iter: 10_000 }
    }
}

/// Projected SOR with ascending sweeps, started from `initial`.
///
/// Stops once a full sweep changes no component by more than `tol` and the
/// complementarity residual is below `tol` as well.
/// Returns the solution and the number of sweeps.
pub fn solve_lcp_psor(
    sys: &TridiagonalLcp,
    initial: &[f64],
    settings: &PsorSettings,
) -> Result<(Vec<f64>, usize)> {
    sys.check_dims()?;
    let n = sys.matrix.len();
    if initial.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: initial.len() });
    }
    let a = &sys.matrix;
    let mut u = initial.to_vec();
    if let Some(g) = &sys.obstacle {
        u.iter_mut().zip(g).for_each(|(ui, &gi)| *ui = ui.max(gi));
    }
    let omega = settings.omega;
    let mut last = f64::INFINITY;
    for sweep in 1..=settings.max_iter {
        let mut change = 0.0_f64;
        for i in 0..n {
            let mut s = sys.rhs[i];
            if i > 0 {
                s -= a.sub[i] * u[i - 1];
            }
            if i + 1 < n {
                s -= a.sup[i] * u[i + 1];
            }
            let gs = s / a.diag[i];
            let mut next = u[i] + omega * (gs - u[i]);
            if let Some(g) = &sys.obstacle {
                next = next.max(g[i]);
            }
            change = change.max((next - u[i]).abs());
            u[i] = next;
        }
        last = change;
        if change <= settings.tol && sys.complementarity_residual(&u) <= settings.tol {
            return Ok((u, sweep));
        }
    }
    Err(Error::NoConvergence {
        what: "projected SOR",
        iterations: settings.max_iter,
        last_change: last,
        trace: Vec::new(),
    })
}

/// Side of the domain on which the obstacle is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactSide {
    /// Put-type: exercise at low indices.
    Low,
    /// Call-type: exercise at high indices.
    High,
}

/// Direct LCP solve by one elimination sweep and one projected substitution
/// sweep. Exact for M-matrices when the contact set is an interval touching
/// `side`.
pub fn solve_lcp_brennan_schwartz(sys: &TridiagonalLcp, side: ContactSide) -> Result<Vec<f64>> {
    sys.check_dims()?;
    sys.matrix.check_m_matrix()?;
    let n = sys.matrix.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = &sys.matrix;
    let project = |i: usize, v: f64| match &sys.obstacle {
        Some(g) => v.max(g[i]),
        None => v,
    };
    let mut d = a.diag.clone();
    let mut b = sys.rhs.clone();
    let mut u = vec![0.0; n];
    match side {
        ContactSide::Low => {
            // Eliminate the super-diagonal from the top index down.
            for i in (0..n - 1).rev() {
                let f = a.sup[i] / d[i + 1];
                d[i] -= f * a.sub[i + 1];
                b[i] -= f * b[i + 1];
            }
            u[0] = project(0, b[0] / d[0]);
            for i in 1..n {
                u[i] = project(i, (b[i] - a.sub[i] * u[i - 1]) / d[i]);
            }
        }
        ContactSide::High => {
            for i in 1..n {
                let f = a.sub[i] / d[i - 1];
                d[i] -= f * a.sup[i - 1];
                b[i] -= f * b[i - 1];
            }
            u[n - 1] = project(n - 1, b[n - 1] / d[n - 1]);
            for i in (0..n - 1).rev() {
                u[i] = project(i, (b[i] - a.sup[i] * u[i + 1]) / d[i]);
            }
        }
    }
    Ok(u)
}

/// Thomas algorithm.
pub fn solve_linear(a: &Tridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let pivot_floor = 1e-300;
    if a.diag[0].abs() < pivot_floor {
        return Err(Error::SingularMatrix { row: 0 });
    }
    c[0] = a.sup[0] / a.diag[0];
    d[0] = rhs[0] / a.diag[0];
    for i in 1..n {
        let denom = a.diag[i] - a.sub[i] * c[i - 1];
        if denom.abs() < pivot_floor || !denom.is_finite() {
            return Err(Error::SingularMatrix { row: i });
        }
        c[i] = if i + 1 < n { a.sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - a.sub[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpDistribution;

    fn coeffs() -> SchemeCoefficients {
        let j = JumpDistribution::double_exponential(0.6, 25.0, 25.0).unwrap();
        let m = ModelParams::new(0.05, 0.2, 3.0, j).unwrap();
        SchemeCoefficients::from_steps(&m, 0.1, 0.1, 1.0).unwrap()
    }

    #[test]
    fn coefficient_example() {
        let c = coeffs();
        assert!((c.p_minus - 0.1994231).abs() < 1e-7);
        assert!((c.p_plus - 0.2005769).abs() < 1e-7);
        assert!((c.p_zero - 0.705).abs() < 1e-12);
    }

    #[test]
    fn zero_log_drift_is_symmetric() {
        // mu = sigma^2 / 2 with lambda = 0 means r = sigma^2 / 2.
        let j = JumpDistribution::gaussian(0.0, 0.1).unwrap();
        let m = ModelParams::new(0.02, 0.2, 0.0, j).unwrap();
        let c = SchemeCoefficients::from_steps(&m, 0.01, 0.05, 0.5).unwrap();
        assert_eq!(c.p_minus, c.p_plus);
    }

    #[test]
    fn coarse_mesh_rejected() {
        // 0.5 sigma^2 / dx = 0.002 < 0.5 |mu - sigma^2/2| = 0.04
        let j = JumpDistribution::gaussian(0.0, 0.1).unwrap();
        let m = ModelParams::new(0.1, 0.2, 0.0, j).unwrap();
        let r = SchemeCoefficients::from_steps(&m, 0.1, 10.0, 1.0);
        assert!(matches!(r, Err(Error::MeshTooCoarse { .. })));
    }

    #[test]
    fn relaxation_example() {
        let c = coeffs();
        assert!((c.jacobi_norm() - 0.2346041).abs() < 1e-7);
        assert!((optimal_relaxation(&c) - 1.0141520).abs() < 1e-7);
        let tiny = SchemeCoefficients { p_minus: 1e-9, p_plus: 1e-9, p_zero: 2e-9, theta: 1.0 };
        assert!((optimal_relaxation(&tiny) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_problem() {
        let c = coeffs();
        for &(b, g) in &[(1.0, 0.2), (1.0, 0.9), (-1.0, -2.0)] {
            let sys = TridiagonalLcp {
                matrix: c.implicit_matrix(1),
                rhs: vec![b],
                obstacle: Some(vec![g]),
            };
            let expected = (b / (1.0 + c.p_zero)).max(g);
            let (u, _) = solve_lcp_psor(&sys, &[0.0], &PsorSettings::new(1.0)).unwrap();
            assert!((u[0] - expected).abs() < 1e-8);
            let u = solve_lcp_brennan_schwartz(&sys, ContactSide::Low).unwrap();
            assert!((u[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_solve() {
        let a = Tridiagonal { sub: vec![0.0; 4], diag: vec![1.0; 4], sup: vec![0.0; 4] };
        let b = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(solve_linear(&a, &b).unwrap(), b);
    }

    #[test]
    fn three_by_three_against_inverse() {
        // A = [[4,-1,0],[-2,5,-1],[0,-1,3]], det = 4*14 + 1*(-6) = 50
        let a = Tridiagonal {
            sub: vec![0.0, -2.0, -1.0],
            diag: vec![4.0, 5.0, 3.0],
            sup: vec![-1.0, -1.0, 0.0],
        };
        let inv = [
            [14.0 / 50.0, 3.0 / 50.0, 1.0 / 50.0],
            [6.0 / 50.0, 12.0 / 50.0, 4.0 / 50.0],
            [2.0 / 50.0, 4.0 / 50.0, 18.0 / 50.0],
        ];
        let b = [1.0, 2.0, 3.0];
        let u = solve_linear(&a, &b).unwrap();
        for i in 0..3 {
            let e: f64 = (0..3).map(|j| inv[i][j] * b[j]).sum();
            assert!((u[i] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let a = Tridiagonal { sub: vec![0.0, 1.0], diag: vec![1.0, 1.0], sup: vec![1.0, 0.0] };
        assert!(matches!(solve_linear(&a, &[1.0, 1.0]), Err(Error::SingularMatrix { row: 1 })));
    }

    #[test]
    fn unconstrained_psor_matches_thomas() {
        let c = coeffs();
        let n = 40;
        let a = c.implicit_matrix(n);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let exact = solve_linear(&a, &rhs).unwrap();
        let sys = TridiagonalLcp { matrix: a.clone(), rhs, obstacle: None };
        let mut s = PsorSettings::new(optimal_relaxation(&c));
        s.tol = 1e-13;
        let (u, _) = solve_lcp_psor(&sys, &vec![0.0; n], &s).unwrap();
        for (x, y) in u.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-11);
        }
        let bs = solve_lcp_brennan_schwartz(&sys, ContactSide::Low).unwrap();
        for (x, y) in bs.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-13);
        }
        let resid = sys.complementarity_residual(&exact);
        assert!(resid <= 1e-12 * sys.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn psor_iteration_limit() {
        let c = coeffs();
        let sys = TridiagonalLcp { matrix: c.implicit_matrix(10), rhs: vec![1.0; 10], obstacle: None };
        let s = PsorSettings { omega: 1.0, tol: 0.0, max_iter: 3 };
        assert!(matches!(solve_lcp_psor(&sys, &[0.0; 10], &s), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn brennan_schwartz_rejects_bad_signs() {
        let sys = TridiagonalLcp {
            matrix: Tridiagonal { sub: vec![0.0, 0.5], diag: vec![1.0, 1.0], sup: vec![0.1, 0.0] },
            rhs: vec![1.0, 1.0],
            obstacle: None,
        };
        assert!(matches!(
            solve_lcp_brennan_schwartz(&sys, ContactSide::Low),
            Err(Error::InvalidStructure { .. })
        ));
    }
}
