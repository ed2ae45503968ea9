//! Special functions needed by the closed-form dissipative factors.

use crate::error::{Error, Result};

/// Bernoulli numbers B_2, B_4, ..., B_20.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Shift at which the Euler-Maclaurin tail takes over from direct summation.
const TAIL_START: f64 = 12.0;

/// Hurwitz zeta function ζ(2, a) = Σ_{n≥0} (n + a)^-2.
///
/// Terms are summed directly until `n + a` reaches [`TAIL_START`]; the rest is
/// the Euler-Maclaurin tail `1/y + 1/(2y²) + Σ_k B_2k / y^(2k+1)`.
pub fn hurwitz_zeta2(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("hurwitz_zeta2 requires a > 0, got {a}")));
    }
    let direct = (TAIL_START - a).ceil().max(0.0) as usize;
    // summed smallest-first
    let head: f64 = (0..direct)
        .rev()
        .map(|n| {
            let y = n as f64 + a;
            1.0 / (y * y)
        })
        .sum();
    let y = direct as f64 + a;
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    let mut pow = inv * inv2; // y^-(2k+1), starting at k = 1
    for b in BERNOULLI_EVEN {
        let term = b * pow;
        tail += term;
        if term.abs() < 1e-18 * inv {
            break;
        }
        pow *= inv2;
    }
    Ok(head + inv + 0.5 * inv2 + tail)
}

/// Stationary single-qubit dissipative factor in a three-dimensional bath,
/// `λ [2θ² ζ(2, θ) − 1]`, with the exact zero-temperature value `λ`.
pub fn gamma0_closed_form(theta: f64, lambda: f64) -> Result<f64> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::domain(format!("temperature must be ≥ 0, got {theta}")));
    }
    if theta == 0.0 {
        return Ok(lambda);
    }
    Ok(lambda * (2.0 * theta * theta * hurwitz_zeta2(theta)? - 1.0))
}
