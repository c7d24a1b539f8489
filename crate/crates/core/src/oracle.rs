//! Independent reference prices: Black-Scholes, the Merton jump series,
//! and the literal double-sum form of the jump operator.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::jumpconv::{BoundaryExtension, DensityWeights};
use crate::model::{ExerciseStyle, JumpDistribution, ModelParams, OptionSpec, Payoff};

fn std_normal_cdf(x: f64) -> f64 {
    // Normal::new(0, 1) cannot fail.
    Normal::new(0.0, 1.0).map(|n| n.cdf(x)).unwrap_or(f64::NAN)
}

/// Closed-form Black-Scholes value of a European put or call.
pub fn black_scholes(spot: f64, strike: f64, r: f64, sigma: f64, maturity: f64, is_put: bool) -> f64 {
    let discount = (-r * maturity).exp();
    let vol = sigma * maturity.sqrt();
    if vol <= 0.0 {
        let forward_intrinsic = spot - strike * discount;
        return if is_put { (-forward_intrinsic).max(0.0) } else { forward_intrinsic.max(0.0) };
    }
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * maturity) / vol;
    let d2 = d1 - vol;
    if is_put {
        strike * discount * std_normal_cdf(-d2) - spot * std_normal_cdf(-d1)
    } else {
        spot * std_normal_cdf(d1) - strike * discount * std_normal_cdf(d2)
    }
}

/// Output of [`merton_european_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub price: f64,
    pub terms: usize,
    /// Magnitude of the last included term.
    pub last_term: f64,
}

/// European price under Gaussian log-jumps as a Poisson mixture of
/// Black-Scholes prices.
pub fn merton_european_series(m: &ModelParams, opt: &OptionSpec, spot: f64) -> Result<SeriesValue> {
    let JumpDistribution::Gaussian { mu_tilde, sigma_tilde } = m.jump else {
        return Err(Error::WrongModel("Gaussian jumps"));
    };
    if opt.style != ExerciseStyle::European || opt.barrier.is_some() {
        return Err(Error::WrongModel("a European contract without barrier"));
    }
    let t = opt.maturity;
    let is_put = matches!(opt.payoff, Payoff::Put { .. });
    let k = opt.strike();
    if m.lambda == 0.0 {
        let price = black_scholes(spot, k, m.r, m.sigma, t, is_put);
        return Ok(SeriesValue { price, terms: 1, last_term: price.abs() });
    }
    let xi = (mu_tilde + 0.5 * sigma_tilde * sigma_tilde).exp();
    let intensity = m.lambda * xi * t;
    let mut log_weight = -intensity;
    let mut price = 0.0;
    let mut last_term;
    let mut n = 0usize;
    loop {
        let nf = n as f64;
        if n > 0 {
            log_weight += intensity.ln() - nf.ln();
        }
        let vol = (m.sigma * m.sigma + nf * sigma_tilde * sigma_tilde / t).sqrt();
        let rate = m.r - m.lambda * (xi - 1.0) + nf * xi.ln() / t;
        let term = log_weight.exp() * black_scholes(spot, k, rate, vol, t, is_put);
        price += term;
        last_term = term.abs();
        n += 1;
        if (nf > intensity && last_term < 1e-12) || n > 10_000 {
            break;
        }
    }
    Ok(SeriesValue { price, terms: n, last_term })
}

/// Literal `O(L J)` evaluation of the jump operator.
pub fn direct_convolution(
    slice: &[f64],
    weights: &DensityWeights,
    grid: &Grid,
    ext: &BoundaryExtension,
    t: f64,
) -> Result<Vec<f64>> {
    if slice.len() != grid.x.len() {
        return Err(Error::DimensionMismatch { expected: grid.x.len(), got: slice.len() });
    }
    let j_count = grid.jump_intervals();
    if weights.weights.len() != j_count {
        return Err(Error::DimensionMismatch { expected: j_count, got: weights.weights.len() });
    }
    let (lo, hi) = (grid.x_min(), grid.x_max());
    let slack = 1e-9 * grid.dz;
    Ok(grid
        .x
        .iter()
        .map(|&x| {
            grid.z[..j_count]
                .iter()
                .zip(&weights.weights)
                .map(|(&z, &w)| {
                    let y = x + z;
                    let v = if y < lo - slack {
                        ext.left(y, t)
                    } else if y > hi + slack {
                        ext.right(y, t)
                    } else {
                        grid.interpolate(slice, y.clamp(lo, hi)).unwrap_or(f64::NAN)
                    };
                    v * w
                })
                .sum()
        })
        .collect())
}
