//! Dimensionless bath description, spectral weight and thermal factors.
//!
//! Units are ħ = k_B = ω_c = 1: frequencies `x = ω/ω_c`, times `τ = ω_c t`,
//! temperatures `θ = k_B T / ħω_c`. Every mode sum over a `d`-dimensional bath
//! becomes an integral against the weight `w_d(x) = λ x^(d−2) e^(−x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Below this value of `x/2θ` the coth factor is evaluated from its Laurent series.
const COTH_SERIES_CUTOFF: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    d: u8,
    lambda: f64,
    theta: f64,
}

impl BathSpec {
    /// `d ∈ {1,2,3}`, `λ ≥ 0`, `θ ≥ 0`. `λ = 0` describes a decoupled bath.
    pub fn new(d: u8, lambda: f64, theta: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::domain(format!("bath dimension must be 1, 2 or 3, got {d}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("coupling λ must be ≥ 0, got {lambda}")));
        }
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::domain(format!("temperature θ must be ≥ 0, got {theta}")));
        }
        Ok(Self { d, lambda, theta })
    }

    pub fn d(&self) -> u8 {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.d, self.lambda, theta)
    }

    /// Spectral weight `λ x^(d−2) e^(−x)`.
    pub fn weight(&self, x: f64) -> f64 {
        let power = match self.d {
            1 => 1.0 / x,
            2 => 1.0,
            _ => x,
        };
        self.lambda * power * (-x).exp()
    }

    /// `coth(x/2θ)`; identically one at θ = 0.
    pub fn coth(&self, x: f64) -> f64 {
        coth_unchecked(x, self.theta)
    }
}

fn coth_unchecked(x: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    let u = x / (2.0 * theta);
    if u < COTH_SERIES_CUTOFF {
        let u2 = u * u;
        1.0 / u + u / 3.0 - u * u2 / 45.0
    } else {
        1.0 / u.tanh()
    }
}

/// Thermal occupation factor `coth(x/2θ)` (exactly 1 at θ = 0).
pub fn thermal_coth(x: f64, theta: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("frequency must be > 0, got {x}")));
    }
    if !(theta >= 0.0) {
        return Err(Error::domain(format!("temperature must be ≥ 0, got {theta}")));
    }
    Ok(coth_unchecked(x, theta))
}

/// Spectral weight `w_d(x)` of `bath` at frequency `x > 0`.
pub fn weight(x: f64, bath: &BathSpec) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("frequency must be > 0, got {x}")));
    }
    Ok(bath.weight(x))
}

/// Low-frequency classification of `∫₀ w_d(x) [coth] f(x) dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    /// Total exponent `p` of the integrand `x^p` as `x → 0`.
    pub exponent: i32,
    pub finite: bool,
}

/// Combines the caller-supplied `x → 0` exponent of `f` with the weight and
/// the `2θ/x` behaviour of coth at finite temperature.
pub fn classify_convergence(f_exponent: i32, bath: &BathSpec, with_coth: bool) -> ConvergenceVerdict {
    let coth_exponent = if with_coth && bath.theta > 0.0 { -1 } else { 0 };
    let exponent = (bath.d as i32 - 2) + f_exponent + coth_exponent;
    ConvergenceVerdict { exponent, finite: exponent > -1 }
}

/// Value of a bath integral, or the analytic divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Integral {
    Finite(f64),
    Divergent { exponent: i32 },
}

impl Integral {
    pub fn finite(self) -> Option<f64> {
        match self {
            Integral::Finite(v) => Some(v),
            Integral::Divergent { .. } => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Integral::Finite(_))
    }

    pub fn into_result(self) -> Result<f64> {
        match self {
            Integral::Finite(v) => Ok(v),
            Integral::Divergent { exponent } => Err(Error::Divergent { exponent }),
        }
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Integral {
        match self {
            Integral::Finite(v) => Integral::Finite(f(v)),
            d => d,
        }
    }
}

/// `∫₀^∞ w_d(x) [coth(x/2θ)] f(x) dx` on `grid`.
///
/// `f_exponent` is the analytic `x → 0` power of `f`; a non-integrable total
/// exponent short-circuits to [`Integral::Divergent`] without touching the grid.
pub fn bath_integral<F>(f: F, f_exponent: i32, bath: &BathSpec, grid: &FrequencyGrid, with_coth: bool) -> Integral
where
    F: Fn(f64) -> f64,
{
    let verdict = classify_convergence(f_exponent, bath, with_coth);
    if !verdict.finite {
        return Integral::Divergent { exponent: verdict.exponent };
    }
    let sum = grid.integrate(|x| {
        let thermal = if with_coth { bath.coth(x) } else { 1.0 };
        bath.weight(x) * thermal * f(x)
    });
    Integral::Finite(sum)
}
