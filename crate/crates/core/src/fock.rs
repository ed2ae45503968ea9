//! Discrete-mode baths: the analytic coherence factors as finite mode sums and
//! an independent truncated-Fock evaluation of `Tr[U_A ρ_T U_B†]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherent::{BranchProfile, Direction};
use crate::error::{Error, Result};

/// One bath mode with frequency `x`, weight `ρ = |χ/x|²` and direction `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMode {
    pub x: f64,
    pub rho: f64,
    pub sigma: Direction,
}

impl DiscreteMode {
    pub fn new(x: f64, rho: f64) -> Self {
        Self { x, rho, sigma: Direction::Plus }
    }
}

fn coth_half(x: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        1.0 / (x / (2.0 * theta)).tanh()
    }
}

fn b_at(branch: &BranchProfile, mode: &DiscreteMode, tau: f64) -> Complex64 {
    branch.b0.eval(mode.x, mode.sigma) * Complex64::cis(-mode.x * tau) - branch.m.eval(mode.x, mode.sigma)
}

/// `Θ(τ) = Σ_q ρ_q [x_q|m|²τ − Im(m* b⁰ (1 − e^{−ix_qτ}))]`.
pub fn theta_discrete(branch: &BranchProfile, modes: &[DiscreteMode], tau: f64) -> f64 {
    modes
        .iter()
        .map(|q| {
            let m = branch.m.eval(q.x, q.sigma);
            let b0 = branch.b0.eval(q.x, q.sigma);
            let one_minus = Complex64::new(1.0, 0.0) - Complex64::cis(-q.x * tau);
            q.rho * (q.x * m.norm_sqr() * tau - (m.conj() * b0 * one_minus).im)
        })
        .sum()
}

/// Analytic `(Γ, Φ, ΔΘ)` for a discrete bath.
pub fn factors_discrete(
    a: &BranchProfile,
    b: &BranchProfile,
    modes: &[DiscreteMode],
    theta: f64,
    tau: f64,
) -> (f64, f64, f64) {
    let mut gamma = 0.0;
    let mut phi = 0.0;
    for q in modes {
        let ba = b_at(a, q, tau);
        let bb = b_at(b, q, tau);
        gamma += 0.5 * q.rho * coth_half(q.x, theta) * (ba - bb).norm_sqr();
        phi -= q.rho * (ba * bb.conj()).im;
    }
    let dtheta = theta_discrete(a, modes, tau) - theta_discrete(b, modes, tau);
    (gamma, phi, dtheta)
}

/// Analytic `η = e^{i(ΔΘ − Φ)} e^{−Γ}` for a discrete bath.
pub fn eta_discrete(a: &BranchProfile, b: &BranchProfile, modes: &[DiscreteMode], theta: f64, tau: f64) -> Complex64 {
    let (gamma, phi, dtheta) = factors_discrete(a, b, modes, theta, tau);
    Complex64::from_polar((-gamma).exp(), dtheta - phi)
}

/// Truncated-Fock oracle settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockOracleConfig {
    pub modes: Vec<DiscreteMode>,
    /// Highest Fock level kept per mode (starting value of the convergence loop).
    pub n_max: usize,
    pub theta: f64,
    /// Convergence tolerance on |Δη| between `n_max` and `n_max + 2`.
    pub tol: f64,
    /// Give up past this truncation.
    pub n_cap: usize,
}

pub const DEFAULT_ORACLE_TOL: f64 = 1e-8;
const DEFAULT_N_CAP: usize = 400;

impl FockOracleConfig {
    /// Picks a starting `n_max` that satisfies the thermal-tail bound.
    pub fn new(modes: Vec<DiscreteMode>, theta: f64, tol: f64) -> Result<Self> {
        let mut n_max = 4;
        if theta > 0.0 {
            for q in &modes {
                if q.x > 0.0 {
                    let n = (-tol.ln() * theta / q.x).ceil() as usize + 1;
                    n_max = n_max.max(n);
                }
            }
        }
        let cfg = Self { modes, n_max, theta, tol, n_cap: DEFAULT_N_CAP };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        self.n_max = n_max;
        self.validate()?;
        Ok(self)
    }

    pub fn mode_freqs(&self) -> Vec<f64> {
        self.modes.iter().map(|q| q.x).collect()
    }

    pub fn mode_weights(&self) -> Vec<f64> {
        self.modes.iter().map(|q| q.rho).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() || self.modes.len() > 4 {
            return Err(Error::domain(format!("oracle needs 1 to 4 modes, got {}", self.modes.len())));
        }
        for q in &self.modes {
            if !(q.x > 0.0) || !(q.rho >= 0.0) || !q.x.is_finite() || !q.rho.is_finite() {
                return Err(Error::domain(format!("invalid mode x={}, ρ={}", q.x, q.rho)));
            }
        }
        if !(self.theta >= 0.0) || !self.theta.is_finite() {
            return Err(Error::domain(format!("temperature must be ≥ 0, got {}", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("oracle tolerance must be positive"));
        }
        if self.n_max < 1 {
            return Err(Error::domain("n_max must be ≥ 1"));
        }
        if self.theta > 0.0 {
            for q in &self.modes {
                let tail = (-q.x * self.n_max as f64 / self.theta).exp();
                if tail >= self.tol {
                    return Err(Error::domain(format!(
                        "thermal occupation e^(-x n_max/θ) = {tail:e} of mode x={} exceeds tol {:e}",
                        q.x, self.tol
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub eta: Complex64,
    /// Truncation at which the value settled.
    pub n_max: usize,
    /// |η(n_max) − η(n_max − 2)|.
    pub delta: f64,
}

/// `⟨m|D(α)|n⟩` for `m, n ≤ n_max`, from the generalized-Laguerre closed form.
pub fn displacement_matrix(alpha: Complex64, n_max: usize) -> DMatrix<Complex64> {
    let dim = n_max + 1;
    let r2 = alpha.norm_sqr();
    let gauss = (-0.5 * r2).exp();
    let log_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=dim).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let mut out = DMatrix::zeros(dim, dim);
    for lo in 0..dim {
        for hi in lo..dim {
            let k = hi - lo;
            let lag = laguerre(lo, k as f64, r2);
            let norm = (0.5 * (log_fact[lo] - log_fact[hi])).exp();
            let base = norm * gauss * lag;
            // ⟨hi|D|lo⟩ carries α^k, ⟨lo|D|hi⟩ carries (−α*)^k
            out[(hi, lo)] = alpha.powu(k as u32) * base;
            if k > 0 {
                out[(lo, hi)] = (-alpha.conj()).powu(k as u32) * base;
            }
        }
    }
    out
}

/// Generalized Laguerre polynomial `L_n^{(a)}(x)` by upward recurrence.
fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Truncated Gibbs populations of one mode, renormalized to unit trace.
pub fn thermal_populations(x: f64, theta: f64, n_max: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..=n_max)
        .map(|n| {
            if theta == 0.0 {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-x * n as f64 / theta).exp()
            }
        })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

fn mode_alphas(a: &BranchProfile, b: &BranchProfile, q: &DiscreteMode, tau: f64) -> (Complex64, Complex64) {
    let s = q.rho.sqrt();
    (s * b_at(a, q, tau), s * b_at(b, q, tau))
}

/// `Tr[D(α_A) ρ_T D(α_B)†]` for one mode in the truncated basis.
fn mode_trace(alpha_a: Complex64, alpha_b: Complex64, x: f64, theta: f64, n_max: usize) -> Complex64 {
    let da = displacement_matrix(alpha_a, n_max);
    let db = displacement_matrix(alpha_b, n_max);
    let p = thermal_populations(x, theta, n_max);
    // Tr[D_A diag(p) D_B†] = Σ_{i,n} D_A[i,n] p_n conj(D_B[i,n])
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..=n_max {
        if p[n] == 0.0 {
            continue;
        }
        let col: Complex64 = (0..=n_max).map(|i| da[(i, n)] * db[(i, n)].conj()).sum();
        acc += p[n] * col;
    }
    acc
}

/// Oracle bath trace at a fixed truncation, mode by mode (the trace of a
/// tensor product factorizes).
pub fn bath_trace_truncated(
    a: &BranchProfile,
    b: &BranchProfile,
    cfg: &FockOracleConfig,
    tau: f64,
    n_max: usize,
) -> Complex64 {
    cfg.modes
        .iter()
        .map(|q| {
            let (aa, ab) = mode_alphas(a, b, q, tau);
            mode_trace(aa, ab, q.x, cfg.theta, n_max)
        })
        .product()
}

/// Same trace assembled on the full tensor-product Fock space. Exponential in
/// the mode count; kept as a cross-check of the factorized path.
pub fn bath_trace_full_tensor(
    a: &BranchProfile,
    b: &BranchProfile,
    cfg: &FockOracleConfig,
    tau: f64,
    n_max: usize,
) -> Complex64 {
    let one = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    let (mut da, mut db, mut rho) = (one.clone(), one.clone(), one);
    for q in &cfg.modes {
        let (aa, ab) = mode_alphas(a, b, q, tau);
        da = da.kronecker(&displacement_matrix(aa, n_max));
        db = db.kronecker(&displacement_matrix(ab, n_max));
        let p = thermal_populations(q.x, cfg.theta, n_max);
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            p.len(),
            p.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        rho = rho.kronecker(&diag);
    }
    (da * rho * db.adjoint()).trace()
}

/// Oracle η: truncated bath trace times the analytic branch phases, with
/// `n_max` raised in steps of two until successive values agree within `tol`.
pub fn fock_oracle_eta(
    a: &BranchProfile,
    b: &BranchProfile,
    cfg: &FockOracleConfig,
    tau: f64,
) -> Result<OracleOutcome> {
    cfg.validate()?;
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("time must be ≥ 0, got {tau}")));
    }
    let phase = Complex64::cis(theta_discrete(a, &cfg.modes, tau) - theta_discrete(b, &cfg.modes, tau));
    let mut n = cfg.n_max;
    let mut prev = phase * bath_trace_truncated(a, b, cfg, tau, n);
    let mut delta = f64::INFINITY;
    while n + 2 <= cfg.n_cap {
        n += 2;
        let cur = phase * bath_trace_truncated(a, b, cfg, tau, n);
        delta = (cur - prev).norm();
        prev = cur;
        if delta < cfg.tol {
            return Ok(OracleOutcome { eta: cur, n_max: n, delta });
        }
    }
    Err(Error::Unconverged { n_max: n, delta, tol: cfg.tol })
}
