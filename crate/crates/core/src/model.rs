//! Jump-diffusion dynamics, contract descriptions, and the limit of the
//! exercise boundary at maturity.
//!
//! The log-return follows
//!
//!   dX = (mu - sigma^2 / 2) dt + sigma dW + sum_{i <= N_t} Z_i
//!
//! with `N` a Poisson process of intensity `lambda` and i.i.d. jumps `Z_i`
//! drawn from a [`JumpDistribution`]. The drift `mu = r + lambda - lambda * xi`
//! makes the discounted price a martingale, where `xi = E[e^Z]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Law of the log-jump size `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpDistribution {
    /// Asymmetric double exponential: up-jumps with probability `p` and rate
    /// `eta1`, down-jumps with probability `1 - p` and rate `eta2`.
    DoubleExponential { p: f64, eta1: f64, eta2: f64 },
    /// Normal log-jumps with mean `mu_tilde` and standard deviation `sigma_tilde`.
    Gaussian { mu_tilde: f64, sigma_tilde: f64 },
}

impl JumpDistribution {
    pub fn double_exponential(p: f64, eta1: f64, eta2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} must lie in [0, 1]")));
        }
        // eta1 <= 1 makes E[e^Z] infinite.
        if !(eta1 > 1.0) || !eta1.is_finite() {
            return Err(Error::InvalidParameter(format!("eta1 = {eta1} must exceed 1")));
        }
        if !(eta2 > 0.0) || !eta2.is_finite() {
            return Err(Error::InvalidParameter(format!("eta2 = {eta2} must be positive")));
        }
        Ok(Self::DoubleExponential { p, eta1, eta2 })
    }

    pub fn gaussian(mu_tilde: f64, sigma_tilde: f64) -> Result<Self> {
        if !mu_tilde.is_finite() {
            return Err(Error::InvalidParameter(format!("mu_tilde = {mu_tilde} must be finite")));
        }
        if !(sigma_tilde > 0.0) || !sigma_tilde.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma_tilde = {sigma_tilde} must be positive"
            )));
        }
        Ok(Self::Gaussian { mu_tilde, sigma_tilde })
    }

    /// Re-check the invariants of a value built by struct literal.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::DoubleExponential { p, eta1, eta2 } => Self::double_exponential(p, eta1, eta2),
            Self::Gaussian { mu_tilde, sigma_tilde } => Self::gaussian(mu_tilde, sigma_tilde),
        }
        .map(|_| ())
    }

    /// `xi = E[e^Z]`.
    pub fn mean_exp(&self) -> f64 {
        match *self {
            Self::DoubleExponential { p, eta1, eta2 } => {
                p * eta1 / (eta1 - 1.0) + (1.0 - p) * eta2 / (eta2 + 1.0)
            }
            Self::Gaussian { mu_tilde, sigma_tilde } => {
                (mu_tilde + 0.5 * sigma_tilde * sigma_tilde).exp()
            }
        }
    }

    /// Pointwise density. The double exponential takes its right limit at 0.
    pub fn density(&self, z: f64) -> f64 {
        match *self {
            Self::DoubleExponential { p, eta1, eta2 } => {
                if z >= 0.0 {
                    p * eta1 * (-eta1 * z).exp()
                } else {
                    (1.0 - p) * eta2 * (eta2 * z).exp()
                }
            }
            Self::Gaussian { mu_tilde, sigma_tilde } => {
                let var = sigma_tilde * sigma_tilde;
                let d = z - mu_tilde;
                (-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::DoubleExponential { p, eta1, eta2 } => p / eta1 - (1.0 - p) / eta2,
            Self::Gaussian { mu_tilde, .. } => mu_tilde,
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Self::DoubleExponential { p, eta1, eta2 } => {
                let second = 2.0 * p / (eta1 * eta1) + 2.0 * (1.0 - p) / (eta2 * eta2);
                let m = self.mean();
                (second - m * m).max(0.0).sqrt()
            }
            Self::Gaussian { sigma_tilde, .. } => sigma_tilde,
        }
    }

    /// Interval of jump sizes retained when the density is truncated.
    ///
    /// Gaussian: `mean +- margin * std`. Double exponential: the exponential
    /// tails are cut at `3.5 * margin` decay lengths, so the default margin of
    /// 4 discards mass below `e^-14`.
    pub fn truncation_interval(&self, margin: f64) -> (f64, f64) {
        match *self {
            Self::DoubleExponential { p, eta1, eta2 } => {
                let reach = 3.5 * margin;
                let lo = if p < 1.0 { -reach / eta2 } else { 0.0 };
                let hi = if p > 0.0 { reach / eta1 } else { 0.0 };
                (lo, hi)
            }
            Self::Gaussian { mu_tilde, sigma_tilde } => {
                (mu_tilde - margin * sigma_tilde, mu_tilde + margin * sigma_tilde)
            }
        }
    }

    /// `E[(e^Z - 1) 1{Z > 0}]`.
    pub fn positive_excess(&self) -> f64 {
        match *self {
            Self::DoubleExponential { p, eta1, .. } => p / (eta1 - 1.0),
            Self::Gaussian { mu_tilde, sigma_tilde } => {
                let hi = mu_tilde + 8.0 * sigma_tilde;
                if hi <= 0.0 {
                    return 0.0;
                }
                adaptive_simpson(|z| (z.exp() - 1.0) * self.density(z), 0.0, hi, 1e-13)
            }
        }
    }

    /// `E[(s e^Z - k)^+]` evaluated by quadrature against the density.
    /// Used for the generic limit-boundary root search.
    pub fn call_like_integral(&self, s: f64, k: f64) -> f64 {
        let a = (k / s).ln();
        let (lo, hi) = match *self {
            Self::DoubleExponential { eta1, eta2, .. } => {
                let hi = a.max(0.0) + 60.0 / (eta1 - 1.0);
                (a, hi.max(a + 60.0 / eta2))
            }
            Self::Gaussian { mu_tilde, sigma_tilde } => (a, mu_tilde + 12.0 * sigma_tilde),
        };
        if hi <= lo {
            return 0.0;
        }
        let f = |z: f64| (s * z.exp() - k) * self.density(z);
        // The double exponential density has a kink at 0; split there.
        if lo < 0.0 && hi > 0.0 {
            adaptive_simpson(f, lo, 0.0, 1e-14 * k) + adaptive_simpson(f, 0.0, hi, 1e-14 * k)
        } else {
            adaptive_simpson(f, lo, hi, 1e-14 * k)
        }
    }
}

/// Risk-neutral jump-diffusion dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub jump: JumpDistribution,
}

impl ModelParams {
    pub fn new(r: f64, sigma: f64, lambda: f64, jump: JumpDistribution) -> Result<Self> {
        let m = Self { r, sigma, lambda, jump };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma = {} must be strictly positive",
                self.sigma
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} must be non-negative",
                self.lambda
            )));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidParameter(format!("r = {} must be non-negative", self.r)));
        }
        self.jump.validate()
    }

    /// `mu = r + lambda - lambda * xi`.
    pub fn drift(&self) -> f64 {
        risk_neutral_drift(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExerciseStyle {
    American,
    European,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff {
    Put { strike: f64 },
    Call { strike: f64 },
}

impl Payoff {
    pub fn strike(&self) -> f64 {
        match *self {
            Payoff::Put { strike } | Payoff::Call { strike } => strike,
        }
    }

    pub fn value(&self, spot: f64) -> f64 {
        match *self {
            Payoff::Put { strike } => (strike - spot).max(0.0),
            Payoff::Call { strike } => (spot - strike).max(0.0),
        }
    }

    pub fn is_put(&self) -> bool {
        matches!(self, Payoff::Put { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Barrier {
    /// Knocked out when the price reaches `level` from above; pays `rebate`.
    DownAndOut { level: f64, rebate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub style: ExerciseStyle,
    pub payoff: Payoff,
    pub maturity: f64,
    pub barrier: Option<Barrier>,
}

impl OptionSpec {
    pub fn new(
        style: ExerciseStyle,
        payoff: Payoff,
        maturity: f64,
        barrier: Option<Barrier>,
    ) -> Result<Self> {
        let o = Self { style, payoff, maturity, barrier };
        o.validate()?;
        Ok(o)
    }

    pub fn american_put(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(ExerciseStyle::American, Payoff::Put { strike }, maturity, None)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.payoff.strike();
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("strike = {k} must be positive")));
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "maturity = {} must be positive",
                self.maturity
            )));
        }
        if let Some(Barrier::DownAndOut { level, rebate }) = self.barrier {
            if !(level > 0.0) || !level.is_finite() {
                return Err(Error::InvalidParameter(format!("barrier = {level} must be positive")));
            }
            if !(rebate >= 0.0) || !rebate.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "rebate = {rebate} must be non-negative"
                )));
            }
            if self.style == ExerciseStyle::American {
                return Err(Error::InvalidParameter(
                    "American barrier contracts are not supported".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn strike(&self) -> f64 {
        self.payoff.strike()
    }

    pub fn is_american(&self) -> bool {
        self.style == ExerciseStyle::American
    }
}

pub fn jump_mean_exp(jump: &JumpDistribution) -> f64 {
    jump.mean_exp()
}

pub fn jump_density(jump: &JumpDistribution, z: f64) -> f64 {
    jump.density(z)
}

pub fn risk_neutral_drift(m: &ModelParams) -> f64 {
    m.r + m.lambda - m.lambda * m.jump.mean_exp()
}

/// Whether the put exercise boundary jumps below the strike at maturity:
/// `r < lambda * E[(e^Z - 1) 1{Z > 0}]`.
pub fn boundary_jumps_at_maturity(m: &ModelParams) -> bool {
    m.lambda > 0.0 && m.r < m.lambda * m.jump.positive_excess()
}

/// Pre-maturity limit `S*` of the American put exercise boundary.
///
/// Closed form for double exponential jumps; bracketed bisection otherwise.
pub fn limit_boundary_s_star(m: &ModelParams, strike: f64) -> Result<f64> {
    if !boundary_jumps_at_maturity(m) {
        return Err(Error::ConditionNotMet);
    }
    match m.jump {
        JumpDistribution::DoubleExponential { p, eta1, .. } => {
            Ok(((eta1 - 1.0) * m.r / (m.lambda * p)).powf(1.0 / eta1) * strike)
        }
        JumpDistribution::Gaussian { .. } => limit_boundary_by_root(m, strike),
    }
}

/// Root of `-r K + lambda * E[(S e^Z - K)^+] = 0` on `(0, K)` by bisection,
/// valid for any jump law. Tolerance `1e-10 * K`.
pub fn limit_boundary_by_root(m: &ModelParams, strike: f64) -> Result<f64> {
    if !boundary_jumps_at_maturity(m) {
        return Err(Error::ConditionNotMet);
    }
    let h = |s: f64| m.lambda * m.jump.call_like_integral(s, strike) - m.r * strike;
    // h(0+) = -rK < 0 and h(K) > 0 under the condition above; h is increasing.
    let (mut lo, mut hi) = (0.0_f64, strike);
    while hi - lo > 1e-10 * strike {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
