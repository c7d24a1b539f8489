//! Discrete jump operator.
//!
//! For a space slice `u`, computes
//!
//!   (I u)_l = sum_{j=0}^{J-1} u_interp(x_l + z_j) w_j,   w_j = rho(z_j) dz,
//!
//! where `u_interp` is piecewise linear on the space mesh and falls back to
//! the contract's boundary extension outside `[x_min, x_max]`. The sum is a
//! correlation on the fine lattice of spacing `dz`, evaluated by zero-padded
//! FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{Barrier, ExerciseStyle, JumpDistribution, ModelParams, OptionSpec, Payoff};

/// Default lower bound on the retained jump mass.
pub const DEFAULT_MIN_MASS: f64 = 1.0 - 1e-3;

/// Quadrature weights `w_j = rho(z_j) dz`, `j = 0 .. J-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityWeights {
    pub weights: Vec<f64>,
    pub total_mass: f64,
    /// Factor applied to bring the raw sum back to 1 (1.0 when untouched).
    pub scale: f64,
}

pub fn discretize_density(jump: &JumpDistribution, grid: &Grid) -> Result<DensityWeights> {
    discretize_density_with(jump, grid, DEFAULT_MIN_MASS)
}

pub fn discretize_density_with(
    jump: &JumpDistribution,
    grid: &Grid,
    min_mass: f64,
) -> Result<DensityWeights> {
    let j_count = grid.jump_intervals();
    let mut weights: Vec<f64> = grid.z[..j_count]
        .iter()
        .map(|&z| jump.density(z) * grid.dz)
        .collect();
    let raw: f64 = weights.iter().sum();
    if raw < min_mass {
        return Err(Error::MassTooLow { mass: raw, min: min_mass });
    }
    let scale = if raw > 1.0 { 1.0 / raw } else { 1.0 };
    if scale != 1.0 {
        weights.iter_mut().for_each(|w| *w *= scale);
    }
    let total_mass = weights.iter().sum::<f64>();
    // Sub-stochastic: nonnegative weights summing to at most one.
    if let Some(row) = weights.iter().position(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidStructure { row });
    }
    if total_mass > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("jump weights sum to {total_mass}")));
    }
    Ok(DensityWeights { weights, total_mass, scale })
}

/// One side of the far-field value used for points outside the space mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarField {
    Constant(f64),
    /// `K - e^x`.
    PutIntrinsic { strike: f64 },
    /// `K e^{-r (T - t)} - e^x`.
    PutForward { strike: f64, rate: f64, maturity: f64 },
    /// `e^x - K e^{-r (T - t)}`.
    CallForward { strike: f64, rate: f64, maturity: f64 },
}

impl FarField {
    pub fn value(&self, x: f64, t: f64) -> f64 {
        match *self {
            FarField::Constant(c) => c,
            FarField::PutIntrinsic { strike } => strike - x.exp(),
            FarField::PutForward { strike, rate, maturity } => {
                strike * (-rate * (maturity - t)).exp() - x.exp()
            }
            FarField::CallForward { strike, rate, maturity } => {
                x.exp() - strike * (-rate * (maturity - t)).exp()
            }
        }
    }
}

/// Values assigned to `u(x, t)` for `x < x_min` and `x > x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryExtension {
    pub below: FarField,
    pub above: FarField,
}

impl BoundaryExtension {
    pub fn for_contract(opt: &OptionSpec, m: &ModelParams) -> Self {
        let k = opt.strike();
        let (rate, maturity) = (m.r, opt.maturity);
        let (mut below, above) = match (opt.payoff, opt.style) {
            (Payoff::Put { .. }, ExerciseStyle::American) => {
                (FarField::PutIntrinsic { strike: k }, FarField::Constant(0.0))
            }
            (Payoff::Put { .. }, ExerciseStyle::European) => {
                (FarField::PutForward { strike: k, rate, maturity }, FarField::Constant(0.0))
            }
            (Payoff::Call { .. }, _) => (
                FarField::Constant(0.0),
                FarField::CallForward { strike: k, rate, maturity },
            ),
        };
        if let Some(Barrier::DownAndOut { rebate, .. }) = opt.barrier {
            below = FarField::Constant(rebate);
        }
        Self { below, above }
    }

    /// Zero on both sides; makes the operator linear.
    pub fn zero() -> Self {
        Self { below: FarField::Constant(0.0), above: FarField::Constant(0.0) }
    }

    pub fn constant(c: f64) -> Self {
        Self { below: FarField::Constant(c), above: FarField::Constant(c) }
    }

    pub fn left(&self, x: f64, t: f64) -> f64 {
        self.below.value(x, t)
    }

    pub fn right(&self, x: f64, t: f64) -> f64 {
        self.above.value(x, t)
    }
}

/// FFT evaluation of the jump operator on a fixed grid.
///
/// Plans and the transformed kernel are built once; [`JumpOperator::apply`]
/// allocates its own scratch so one operator may be shared across threads.
pub struct JumpOperator {
    weights: DensityWeights,
    x_min: f64,
    dz: f64,
    alpha: usize,
    intervals: usize,
    z_offset: i64,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex64>,
}

impl std::fmt::Debug for JumpOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpOperator")
            .field("jumps", &self.weights.weights.len())
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl JumpOperator {
    pub fn new(weights: DensityWeights, grid: &Grid) -> Result<Self> {
        let j_count = grid.jump_intervals();
        if weights.weights.len() != j_count {
            return Err(Error::DimensionMismatch { expected: j_count, got: weights.weights.len() });
        }
        let fine_len = grid.intervals() * grid.alpha + j_count;
        let fft_len = (fine_len + j_count - 1).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);

        // Reversed kernel turns the correlation into a convolution.
        let mut kernel = vec![Complex64::new(0.0, 0.0); fft_len];
        for (i, &w) in weights.weights.iter().rev().enumerate() {
            kernel[i] = Complex64::new(w, 0.0);
        }
        forward.process(&mut kernel);
        let norm = 1.0 / fft_len as f64;
        kernel.iter_mut().for_each(|c| *c *= norm);

        Ok(Self {
            weights,
            x_min: grid.x_min(),
            dz: grid.dz,
            alpha: grid.alpha,
            intervals: grid.intervals(),
            z_offset: grid.z_offset,
            fft_len,
            forward,
            inverse,
            kernel,
        })
    }

    pub fn weights(&self) -> &DensityWeights {
        &self.weights
    }

    /// Samples of `u_interp` on the fine lattice `x_min + (k + z_offset) dz`.
    fn fine_samples(&self, slice: &[f64], ext: &BoundaryExtension, t: f64) -> Vec<f64> {
        let j_count = self.weights.weights.len();
        let top = (self.intervals * self.alpha) as i64;
        let alpha = self.alpha as i64;
        (0..(self.intervals * self.alpha + j_count) as i64)
            .map(|k| {
                let q = k + self.z_offset;
                if q < 0 {
                    ext.left(self.x_min + q as f64 * self.dz, t)
                } else if q > top {
                    ext.right(self.x_min + q as f64 * self.dz, t)
                } else {
                    let l = (q / alpha) as usize;
                    let rem = q % alpha;
                    if rem == 0 {
                        slice[l]
                    } else {
                        let w = rem as f64 / alpha as f64;
                        (1.0 - w) * slice[l] + w * slice[l + 1]
                    }
                }
            })
            .collect()
    }

    pub fn apply(&self, slice: &[f64], ext: &BoundaryExtension, t: f64) -> Result<Vec<f64>> {
        if slice.len() != self.intervals + 1 {
            return Err(Error::DimensionMismatch { expected: self.intervals + 1, got: slice.len() });
        }
        let j_count = self.weights.weights.len();
        let samples = self.fine_samples(slice, ext, t);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (b, &s) in buf.iter_mut().zip(&samples) {
            b.re = s;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        Ok((0..=self.intervals)
            .map(|l| buf[l * self.alpha + j_count - 1].re)
            .collect())
    }
}

/// One-shot convenience wrapper around [`JumpOperator`].
pub fn apply_jump_operator(
    slice: &[f64],
    weights: &DensityWeights,
    grid: &Grid,
    ext: &BoundaryExtension,
    t: f64,
) -> Result<Vec<f64>> {
    JumpOperator::new(weights.clone(), grid)?.apply(slice, ext, t)
}
