//! Coherent-product branches: displacement trajectories, the phase factors
//! Θ and Φ, the dissipative factor Γ and the bath correlation η.
//!
//! Mode sums `Σ_q |χ_q/ω_q|² g(ω_q)` are mapped to `½∫dx w_d(x) ⟨g⟩_σ`, so for a
//! branch pair
//!
//! ```text
//! Γ(τ) = ¼ ∫ w coth(x/2θ) ⟨|b_A − b_B|²⟩_σ dx
//! Φ(τ) = −½ ∫ w ⟨Im(b_A b_B*)⟩_σ dx
//! Θ(τ) = ½ ∫ w [x⟨|m|²⟩ τ − ⟨Im(m* b⁰ (1 − e^{−ixτ}))⟩_σ] dx
//! ```
//!
//! and `η = e^{i(Θ_A − Θ_B − Φ)} e^{−Γ}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{bath_integral, BathSpec, Integral};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Propagation direction of a mode. One-dimensional baths carry two degenerate
/// directions; isotropic couplings simply do not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Plus, Direction::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }
}

/// `amp · exp(i (σ·dir_rate + rate) x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTerm {
    pub amp: Complex64,
    pub dir_rate: f64,
    pub rate: f64,
}

impl PhaseTerm {
    pub fn new(amp: Complex64, dir_rate: f64, rate: f64) -> Self {
        Self { amp, dir_rate, rate }
    }

    pub fn constant(amp: Complex64) -> Self {
        Self::new(amp, 0.0, 0.0)
    }

    fn omega(&self, sigma: Direction) -> f64 {
        sigma.sign() * self.dir_rate + self.rate
    }

    pub fn eval(&self, x: f64, sigma: Direction) -> Complex64 {
        self.amp * Complex64::cis(self.omega(sigma) * x)
    }
}

/// Finite sum of plane-wave terms in `x`, the closed family in which every
/// coupling and displacement of this crate lives. Products and conjugates stay
/// in the family, which makes the low-frequency order exactly computable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSum {
    terms: Vec<PhaseTerm>,
}

/// Largest Taylor order probed by [`PhaseSum::low_frequency_order`].
const MAX_TAYLOR_ORDER: u32 = 12;
const TAYLOR_ZERO_TOL: f64 = 1e-9;

impl PhaseSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_terms(vec![PhaseTerm::constant(c)])
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    pub fn from_terms(terms: Vec<PhaseTerm>) -> Self {
        Self { terms }.simplified()
    }

    pub fn terms(&self) -> &[PhaseTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: f64, sigma: Direction) -> Complex64 {
        self.terms.iter().map(|t| t.eval(x, sigma)).sum()
    }

    /// True when no term depends on the direction.
    pub fn is_isotropic(&self) -> bool {
        self.terms.iter().all(|t| t.dir_rate == 0.0)
    }

    /// Merges terms with equal rates and drops vanishing amplitudes.
    fn simplified(self) -> Self {
        let mut merged: Vec<PhaseTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            match merged.iter_mut().find(|m| same_rate(m.dir_rate, t.dir_rate) && same_rate(m.rate, t.rate)) {
                Some(m) => m.amp += t.amp,
                None => merged.push(t),
            }
        }
        let scale = merged.iter().map(|t| t.amp.norm()).fold(0.0, f64::max);
        merged.retain(|t| t.amp.norm() > 1e-15 * scale && t.amp.norm() > 0.0);
        Self { terms: merged }
    }

    pub fn add(&self, other: &PhaseSum) -> PhaseSum {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::from_terms(terms)
    }

    pub fn sub(&self, other: &PhaseSum) -> PhaseSum {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> PhaseSum {
        Self::from_terms(self.terms.iter().map(|t| PhaseTerm { amp: t.amp * c, ..*t }).collect())
    }

    pub fn conj(&self) -> PhaseSum {
        Self::from_terms(self.terms.iter().map(|t| PhaseTerm::new(t.amp.conj(), -t.dir_rate, -t.rate)).collect())
    }

    pub fn mul(&self, other: &PhaseSum) -> PhaseSum {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(PhaseTerm::new(a.amp * b.amp, a.dir_rate + b.dir_rate, a.rate + b.rate));
            }
        }
        Self::from_terms(terms)
    }

    /// Multiplies by `e^{i rate x}`.
    pub fn shift(&self, rate: f64) -> PhaseSum {
        Self::from_terms(self.terms.iter().map(|t| PhaseTerm { rate: t.rate + rate, ..*t }).collect())
    }

    /// Imaginary part as a phase sum: `(f − f*)/2i`.
    pub fn imag_part(&self) -> PhaseSum {
        self.sub(&self.conj()).scale(Complex64::new(0.0, -0.5))
    }

    /// Smallest `k` with a nonzero `x^k` coefficient in the direction average
    /// `⟨f(x,σ)⟩_σ`, or `None` when the average vanishes identically.
    pub fn low_frequency_order(&self) -> Option<i32> {
        if self.terms.is_empty() {
            return None;
        }
        for k in 0..=MAX_TAYLOR_ORDER {
            let mut coeff = Complex64::new(0.0, 0.0);
            let mut scale = 0.0;
            for t in &self.terms {
                for sigma in Direction::BOTH {
                    let w = t.omega(sigma).powi(k as i32);
                    coeff += 0.5 * t.amp * w;
                    scale += 0.5 * t.amp.norm() * w.abs();
                }
            }
            if scale > 0.0 && coeff.norm() > TAYLOR_ZERO_TOL * scale {
                return Some(k as i32);
            }
        }
        // no coefficient survived up to the probe order: treat as that smooth
        Some(MAX_TAYLOR_ORDER as i32)
    }
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0)
}

/// `⟨f(x,σ)⟩_σ` over both directions.
pub fn direction_average<F: Fn(Direction) -> f64>(f: F) -> f64 {
    0.5 * (f(Direction::Plus) + f(Direction::Minus))
}

/// One register branch: normalized coupling `m(x,σ)` and initial offset
/// `b⁰(x,σ)` of the bath displacement from its stationary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchProfile {
    pub label: String,
    pub m: PhaseSum,
    pub b0: PhaseSum,
}

impl BranchProfile {
    pub fn new(label: impl Into<String>, m: PhaseSum, b0: PhaseSum) -> Self {
        Self { label: label.into(), m, b0 }
    }

    /// Bath at the branch's stationary point (`b⁰ = 0`).
    pub fn stationary(label: impl Into<String>, m: PhaseSum) -> Self {
        Self::new(label, m, PhaseSum::zero())
    }

    /// Bath initially undisplaced (`β(0) = 0`, i.e. `b⁰ = m`).
    pub fn unentangled(label: impl Into<String>, m: PhaseSum) -> Self {
        let b0 = m.clone();
        Self::new(label, m, b0)
    }

    pub fn with_initial(mut self, b0: PhaseSum) -> Self {
        self.b0 = b0;
        self
    }

    /// Single-qubit branch, `m = ±1`.
    pub fn single_qubit(up: bool, stationary: bool) -> Self {
        let (label, m) = if up { ("up", 1.0) } else { ("down", -1.0) };
        if stationary {
            Self::stationary(label, PhaseSum::real(m))
        } else {
            Self::unentangled(label, PhaseSum::real(m))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementTrajectory {
    pub branch: BranchProfile,
    pub tau: f64,
}

impl DisplacementTrajectory {
    pub fn b(&self, x: f64, sigma: Direction) -> Complex64 {
        displacement(&self.branch, x, sigma, self.tau)
    }

    /// `b(·,·,τ)` as a phase sum.
    pub fn phase_sum(&self) -> PhaseSum {
        self.branch.b0.shift(-self.tau).sub(&self.branch.m)
    }
}

pub fn evolve_displacement(branch: &BranchProfile, tau: f64) -> Result<DisplacementTrajectory> {
    check_tau(tau)?;
    Ok(DisplacementTrajectory { branch: branch.clone(), tau })
}

#[inline]
fn displacement(branch: &BranchProfile, x: f64, sigma: Direction, tau: f64) -> Complex64 {
    branch.b0.eval(x, sigma) * Complex64::cis(-x * tau) - branch.m.eval(x, sigma)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("time must be ≥ 0, got {tau}")));
    }
    Ok(())
}

/// Dissipative factor Γ(τ) of a branch pair.
pub fn gamma_dissipative(
    a: &BranchProfile,
    b: &BranchProfile,
    tau: f64,
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<Integral> {
    check_tau(tau)?;
    let delta = trajectory_difference(a, b, tau);
    let sq = delta.mul(&delta.conj());
    let Some(order) = sq.low_frequency_order() else {
        return Ok(Integral::Finite(0.0));
    };
    Ok(bath_integral(
        |x| 0.25 * direction_average(|s| (displacement(a, x, s, tau) - displacement(b, x, s, tau)).norm_sqr()),
        order,
        bath,
        grid,
        true,
    ))
}

/// Analytic `dΓ/dτ` under free evolution.
pub fn gamma_rate(
    a: &BranchProfile,
    b: &BranchProfile,
    tau: f64,
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<Integral> {
    check_tau(tau)?;
    let delta = trajectory_difference(a, b, tau);
    let db0 = a.b0.sub(&b.b0);
    let integrand = delta.conj().mul(&db0.shift(-tau)).imag_part();
    let Some(order) = integrand.low_frequency_order() else {
        return Ok(Integral::Finite(0.0));
    };
    Ok(bath_integral(
        |x| {
            let e = Complex64::cis(-x * tau);
            0.5 * x
                * direction_average(|s| {
                    let d = displacement(a, x, s, tau) - displacement(b, x, s, tau);
                    let d0 = a.b0.eval(x, s) - b.b0.eval(x, s);
                    (d.conj() * d0 * e).im
                })
        },
        order + 1,
        bath,
        grid,
        true,
    ))
}

fn trajectory_difference(a: &BranchProfile, b: &BranchProfile, tau: f64) -> PhaseSum {
    let ta = DisplacementTrajectory { branch: a.clone(), tau }.phase_sum();
    let tb = DisplacementTrajectory { branch: b.clone(), tau }.phase_sum();
    ta.sub(&tb)
}

/// Cross-branch phase factor Φ(τ).
pub fn phi_phase(
    a: &BranchProfile,
    b: &BranchProfile,
    tau: f64,
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<Integral> {
    check_tau(tau)?;
    let ta = DisplacementTrajectory { branch: a.clone(), tau }.phase_sum();
    let tb = DisplacementTrajectory { branch: b.clone(), tau }.phase_sum();
    let Some(order) = ta.mul(&tb.conj()).imag_part().low_frequency_order() else {
        return Ok(Integral::Finite(0.0));
    };
    Ok(bath_integral(
        |x| -0.5 * direction_average(|s| (displacement(a, x, s, tau) * displacement(b, x, s, tau).conj()).im),
        order,
        bath,
        grid,
        false,
    ))
}

/// Stationary energy shift `Ω⁰ = ½∫ w x ⟨|m|²⟩ dx`; finite for every d ≥ 1.
pub fn energy_shift(branch: &BranchProfile, bath: &BathSpec, grid: &FrequencyGrid) -> f64 {
    let order = branch.m.mul(&branch.m.conj()).low_frequency_order();
    let Some(order) = order else { return 0.0 };
    bath_integral(|x| 0.5 * x * direction_average(|s| branch.m.eval(x, s).norm_sqr()), order + 1, bath, grid, false)
        .finite()
        .expect("energy-shift integrand is integrable for d ≥ 1")
}

/// Branch phase Θ(τ), time-integrated in closed form.
pub fn theta_phase(branch: &BranchProfile, tau: f64, bath: &BathSpec, grid: &FrequencyGrid) -> Result<f64> {
    check_tau(tau)?;
    let static_part = energy_shift(branch, bath, grid) * tau;
    if branch.b0.is_zero() || branch.m.is_zero() {
        return Ok(static_part);
    }
    // m* b⁰ (1 − e^{−ixτ}) vanishes at x = 0; with w ~ x^(d−2) it is integrable for d ≥ 1
    let transient = bath_integral(
        |x| {
            let one_minus = Complex64::new(1.0, 0.0) - Complex64::cis(-x * tau);
            0.5 * direction_average(|s| (branch.m.eval(x, s).conj() * branch.b0.eval(x, s) * one_minus).im)
        },
        1,
        bath,
        grid,
        false,
    )
    .into_result()?;
    Ok(static_part - transient)
}

/// Bath correlation η(τ) of a branch pair; a divergent Γ gives exactly zero.
pub fn eta(a: &BranchProfile, b: &BranchProfile, tau: f64, bath: &BathSpec, grid: &FrequencyGrid) -> Result<Complex64> {
    Ok(coherence_sample(a, b, tau, bath, grid)?.eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceSample {
    pub tau: f64,
    /// `+∞` when the dissipative integral diverges.
    pub gamma: f64,
    pub phi: f64,
    pub dtheta: f64,
    pub eta: Complex64,
}

pub fn coherence_sample(
    a: &BranchProfile,
    b: &BranchProfile,
    tau: f64,
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<CoherenceSample> {
    let gamma = gamma_dissipative(a, b, tau, bath, grid)?;
    let dtheta = theta_phase(a, tau, bath, grid)? - theta_phase(b, tau, bath, grid)?;
    let (gamma, phi, eta) = match gamma {
        Integral::Divergent { .. } => {
            // η vanishes, Φ is reported only if it is itself finite
            let phi = phi_phase(a, b, tau, bath, grid)?.finite().unwrap_or(f64::NAN);
            (f64::INFINITY, phi, Complex64::new(0.0, 0.0))
        }
        Integral::Finite(g) => {
            let phi = phi_phase(a, b, tau, bath, grid)?.into_result()?;
            (g, phi, Complex64::from_polar((-g).exp(), dtheta - phi))
        }
    };
    Ok(CoherenceSample { tau, gamma, phi, dtheta, eta })
}

/// Time series of the coherence of one branch pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoherenceTrace {
    pub times: Vec<f64>,
    pub gamma: Vec<f64>,
    pub phi: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub eta: Vec<Complex64>,
}

pub const COHERENCE_TRACE_COLUMNS: [&str; 7] = ["tau", "gamma", "phi", "dtheta", "eta_re", "eta_im", "eta_abs"];

impl CoherenceTrace {
    /// Evaluates all samples (in parallel); results are ordered as `times`.
    pub fn compute(
        a: &BranchProfile,
        b: &BranchProfile,
        times: &[f64],
        bath: &BathSpec,
        grid: &FrequencyGrid,
    ) -> Result<Self> {
        let samples: Vec<CoherenceSample> =
            times.par_iter().map(|&t| coherence_sample(a, b, t, bath, grid)).collect::<Result<_>>()?;
        Ok(Self::from_samples(samples))
    }

    pub fn from_samples(samples: Vec<CoherenceSample>) -> Self {
        let mut trace = Self::default();
        for s in samples {
            trace.times.push(s.tau);
            trace.gamma.push(s.gamma);
            trace.phi.push(s.phi);
            trace.dtheta.push(s.dtheta);
            trace.eta.push(s.eta);
        }
        trace
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Rows in column order [`COHERENCE_TRACE_COLUMNS`].
    pub fn rows(&self) -> impl Iterator<Item = [f64; 7]> + '_ {
        (0..self.len()).map(move |k| {
            let e = self.eta[k];
            [self.times[k], self.gamma[k], self.phi[k], self.dtheta[k], e.re, e.im, e.norm()]
        })
    }
}

/// Register state `ρ^R(τ)_{AB} = e^{−i(φ_A−φ_B)τ} η_{AB}(τ) ρ^R_{AB}`.
pub fn reduced_density_matrix(
    rho_param: &DMatrix<Complex64>,
    eta: &DMatrix<Complex64>,
    phases: &[f64],
    tau: f64,
) -> Result<DMatrix<Complex64>> {
    let n = rho_param.nrows();
    if rho_param.ncols() != n || eta.nrows() != n || eta.ncols() != n || phases.len() != n {
        return Err(Error::Matrix(format!(
            "shape mismatch: ρ {}×{}, η {}×{}, {} phases",
            rho_param.nrows(),
            rho_param.ncols(),
            eta.nrows(),
            eta.ncols(),
            phases.len()
        )));
    }
    check_hermitian(rho_param)?;
    check_hermitian(eta)?;
    for k in 0..n {
        if (eta[(k, k)] - Complex64::new(1.0, 0.0)).norm() > HERMITIAN_TOL {
            return Err(Error::Matrix(format!("η diagonal entry {k} is {} ≠ 1", eta[(k, k)])));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rho_param[(i, i)]
        } else {
            Complex64::cis(-(phases[i] - phases[j]) * tau) * eta[(i, j)] * rho_param[(i, j)]
        }
    }))
}

const HERMITIAN_TOL: f64 = 1e-12;

fn check_hermitian(m: &DMatrix<Complex64>) -> Result<()> {
    let asym = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > HERMITIAN_TOL {
        return Err(Error::NonHermitian(asym));
    }
    Ok(())
}

/// Which test state `(|0⟩ + e^{iφ}|1⟩)/√2` the register is projected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisPhase {
    Real,
    Imaginary,
}

/// Probability of finding the normalized test state after the branches
/// `|β₁⟩`, `|β₂⟩` were prepared: `½ + ½ Re⟨β₁|β₂⟩` (or `Im` for the i-phase).
pub fn readout_probability(overlap: Complex64, basis: BasisPhase) -> Result<f64> {
    check_overlap(overlap)?;
    let part = match basis {
        BasisPhase::Real => overlap.re,
        BasisPhase::Imaginary => overlap.im,
    };
    Ok((0.5 + 0.5 * part).clamp(0.0, 1.0))
}

/// Literal `½ + Re⟨β₁|β₂⟩` form, which leaves [0, 1] for `|Re⟨β₁|β₂⟩| > ½`;
/// such inputs are rejected rather than clamped.
pub fn readout_probability_unnormalized(overlap: Complex64, basis: BasisPhase) -> Result<f64> {
    check_overlap(overlap)?;
    let part = match basis {
        BasisPhase::Real => overlap.re,
        BasisPhase::Imaginary => overlap.im,
    };
    let p = 0.5 + part;
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::domain(format!("½ + overlap = {p} is not a probability")));
    }
    Ok(p.clamp(0.0, 1.0))
}

fn check_overlap(overlap: Complex64) -> Result<()> {
    if !(overlap.norm() <= 1.0 + 1e-12) {
        return Err(Error::domain(format!("|overlap| = {} exceeds 1", overlap.norm())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridOptions;
    use crate::special::gamma0_closed_form;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(bath: &BathSpec, rate: f64) -> FrequencyGrid {
        FrequencyGrid::for_bath(bath, &GridOptions::default().with_max_rate(rate)).unwrap()
    }

    #[test]
    fn phase_sum_algebra() {
        let f = PhaseSum::from_terms(vec![PhaseTerm::new(c(1.0, 2.0), 0.5, -1.0), PhaseTerm::constant(c(0.3, 0.0))]);
        let g = PhaseSum::from_terms(vec![PhaseTerm::new(c(-0.7, 0.1), -0.2, 2.0)]);
        for &x in &[0.1, 1.3, 7.0] {
            for s in Direction::BOTH {
                let (fv, gv) = (f.eval(x, s), g.eval(x, s));
                assert!((f.mul(&g).eval(x, s) - fv * gv).norm() < 1e-14);
                assert!((f.conj().eval(x, s) - fv.conj()).norm() < 1e-14);
                assert!((f.sub(&g).eval(x, s) - (fv - gv)).norm() < 1e-14);
                assert!((f.imag_part().eval(x, s) - c(fv.im, 0.0)).norm() < 1e-14);
            }
        }
        assert!(f.sub(&f).is_zero());
    }

    #[test]
    fn low_frequency_orders() {
        // e^{-ixτ} - 1 ~ x, |.|² ~ x²
        let b = PhaseSum::from_terms(vec![PhaseTerm::new(c(1.0, 0.0), 0.0, -2.0), PhaseTerm::constant(c(-1.0, 0.0))]);
        assert_eq!(b.low_frequency_order(), Some(1));
        assert_eq!(b.mul(&b.conj()).low_frequency_order(), Some(2));
        assert_eq!(PhaseSum::real(3.0).low_frequency_order(), Some(0));
        assert_eq!(PhaseSum::zero().low_frequency_order(), None);
        // sin(σ x) averages to zero at every order
        let odd =
            PhaseSum::from_terms(vec![PhaseTerm::new(c(0.0, -0.5), 1.0, 0.0), PhaseTerm::new(c(0.0, 0.5), -1.0, 0.0)]);
        assert_eq!(odd.low_frequency_order(), Some(MAX_TAYLOR_ORDER as i32));
    }

    #[test]
    fn evolve_examples() {
        let stat = BranchProfile::stationary("s", PhaseSum::real(0.7));
        let t = evolve_displacement(&stat, 3.3).unwrap();
        assert!((t.b(2.0, Direction::Plus) - c(-0.7, 0.0)).norm() < 1e-15);

        let up = BranchProfile::single_qubit(true, false);
        let t = evolve_displacement(&up, 1.7).unwrap();
        let x = 0.9;
        assert!((t.b(x, Direction::Minus) - (Complex64::cis(-x * 1.7) - 1.0)).norm() < 1e-15);

        let general =
            BranchProfile::stationary("g", PhaseSum::real(0.4)).with_initial(PhaseSum::constant(c(0.3, -0.8)));
        let x = 1.3;
        let t0 = evolve_displacement(&general, 0.0).unwrap().b(x, Direction::Plus);
        let tp = evolve_displacement(&general, 2.0 * std::f64::consts::PI / x).unwrap().b(x, Direction::Plus);
        assert!((t0 - tp).norm() < 1e-14);
        assert!((t0 - c(-0.1, -0.8)).norm() < 1e-15);
        assert!(evolve_displacement(&general, -1.0).is_err());
    }

    #[test]
    fn stationary_pair_matches_zeta_anchor() {
        let up = BranchProfile::single_qubit(true, true);
        let down = BranchProfile::single_qubit(false, true);
        for theta in [0.0, 0.1, 1.0] {
            let bath = BathSpec::new(3, 0.25, theta).unwrap();
            let g = gamma_dissipative(&up, &down, 5.0, &bath, &grid(&bath, 5.0)).unwrap().finite().unwrap();
            let exact = gamma0_closed_form(theta, 0.25).unwrap();
            assert!(((g - exact) / exact).abs() < 1e-9, "θ={theta}");
        }
    }

    #[test]
    fn free_decay_matches_log() {
        let bath = BathSpec::new(1, 1.0, 0.0).unwrap();
        let up = BranchProfile::single_qubit(true, false);
        let down = BranchProfile::single_qubit(false, false);
        let g = grid(&bath, 10.0);
        for tau in [0.0, 0.5, 1.0, 4.0, 10.0] {
            let v = gamma_dissipative(&up, &down, tau, &bath, &g).unwrap().finite().unwrap();
            assert!((v - (1.0 + tau * tau).ln()).abs() < 1e-9, "τ={tau}: {v}");
        }
    }

    #[test]
    fn eta_example_and_phase_cancellation() {
        let bath = BathSpec::new(1, 0.25, 0.0).unwrap();
        let up = BranchProfile::single_qubit(true, false);
        let down = BranchProfile::single_qubit(false, false);
        let g = grid(&bath, 1.0);
        let s = coherence_sample(&up, &down, 1.0, &bath, &g).unwrap();
        assert!(s.phi.abs() < 1e-14);
        assert!(s.dtheta.abs() < 1e-14);
        assert!((s.eta.re - 0.840_896_415_253_714_5).abs() < 1e-9);
        assert!(s.eta.im.abs() < 1e-14);
    }

    #[test]
    fn divergent_pair_gives_zero_eta() {
        let bath = BathSpec::new(1, 0.25, 0.0).unwrap();
        let up = BranchProfile::single_qubit(true, true);
        let down = BranchProfile::single_qubit(false, true);
        let g = grid(&bath, 1.0);
        assert!(!gamma_dissipative(&up, &down, 1.0, &bath, &g).unwrap().is_finite());
        assert_eq!(eta(&up, &down, 1.0, &bath, &g).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn theta_examples() {
        let bath = BathSpec::new(3, 1.0, 0.0).unwrap();
        let g = grid(&bath, 10.0);
        let up = BranchProfile::single_qubit(true, true);
        assert!((theta_phase(&up, 3.0, &bath, &g).unwrap() - 3.0).abs() < 1e-12);
        assert!((energy_shift(&up, &bath, &g) - 1.0).abs() < 1e-12);
        let off = BranchProfile::stationary("0", PhaseSum::zero()).with_initial(PhaseSum::real(1.0));
        assert_eq!(theta_phase(&off, 3.0, &bath, &g).unwrap(), 0.0);
    }

    #[test]
    fn real_displacements_have_no_phi() {
        let bath = BathSpec::new(2, 1.0, 0.0).unwrap();
        let g = grid(&bath, 0.0);
        let a = BranchProfile::stationary("a", PhaseSum::real(0.3));
        let b = BranchProfile::stationary("b", PhaseSum::real(-1.1));
        assert_eq!(phi_phase(&a, &b, 2.0, &bath, &g).unwrap(), Integral::Finite(0.0));
        assert_eq!(gamma_dissipative(&a, &a, 2.0, &bath, &g).unwrap(), Integral::Finite(0.0));
    }

    #[test]
    fn readout_examples() {
        assert_eq!(readout_probability(c(0.0, 0.0), BasisPhase::Real).unwrap(), 0.5);
        assert_eq!(readout_probability_unnormalized(c(0.5, 0.0), BasisPhase::Real).unwrap(), 1.0);
        let ov = c((-0.25f64).exp(), 0.0);
        assert!(readout_probability_unnormalized(ov, BasisPhase::Real).is_err());
        let p = readout_probability(ov, BasisPhase::Real).unwrap();
        assert!((p - 0.5 * (1.0 + (-0.25f64).exp())).abs() < 1e-15);
        assert!((readout_probability(c(0.0, 0.6), BasisPhase::Imaginary).unwrap() - 0.8).abs() < 1e-15);
        assert!(readout_probability(c(1.0, 0.5), BasisPhase::Real).is_err());
    }

    #[test]
    fn density_matrix_examples() {
        let rho = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let eta0 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let out = reduced_density_matrix(&rho, &eta0, &[0.5, -0.5], 2.0).unwrap();
        assert_eq!(out[(0, 1)], c(0.0, 0.0));
        assert_eq!(out[(0, 0)], c(0.5, 0.0));

        let ones = DMatrix::from_element(2, 2, c(1.0, 0.0));
        let out = reduced_density_matrix(&rho, &ones, &[0.5, -0.5], 2.0).unwrap();
        assert!((out[(0, 1)] - 0.5 * Complex64::cis(-2.0)).norm() < 1e-15);

        let bad = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.1, 0.0), c(0.5, 0.0)]);
        assert!(matches!(reduced_density_matrix(&bad, &ones, &[0.0, 0.0], 1.0), Err(Error::NonHermitian(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn eta_modulus_is_exp_minus_gamma(
            b0r in -1.0f64..1.0, b0i in -1.0f64..1.0, m in -2.0f64..2.0, tau in 0.0f64..8.0, theta in 0.0f64..2.0,
        ) {
            let bath = BathSpec::new(3, 0.4, theta).unwrap();
            let g = grid(&bath, tau);
            let a = BranchProfile::stationary("a", PhaseSum::real(m)).with_initial(PhaseSum::constant(c(b0r, b0i)));
            let b = BranchProfile::single_qubit(false, false);
            let s = coherence_sample(&a, &b, tau, &bath, &g).unwrap();
            prop_assert!(s.gamma >= 0.0);
            prop_assert!((s.eta.norm() - (-s.gamma).exp()).abs() < 1e-14);
            let r = coherence_sample(&b, &a, tau, &bath, &g).unwrap();
            prop_assert!((r.eta - s.eta.conj()).norm() < 1e-12);
        }

        #[test]
        fn density_matrix_preserves_trace_and_psd(
            p in 0.05f64..0.95, coh in 0.0f64..1.0, arg in -3.0f64..3.0, g in 0.0f64..3.0, garg in -3.0f64..3.0, tau in 0.0f64..5.0,
        ) {
            let off = Complex64::from_polar(coh * (p * (1.0 - p)).sqrt(), arg);
            let rho = DMatrix::from_row_slice(2, 2, &[c(p, 0.0), off, off.conj(), c(1.0 - p, 0.0)]);
            let e = Complex64::from_polar((-g).exp(), garg);
            let eta = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), e, e.conj(), c(1.0, 0.0)]);
            let out = reduced_density_matrix(&rho, &eta, &[0.3, -0.2], tau).unwrap();
            prop_assert!((out.trace() - c(1.0, 0.0)).norm() < 1e-14);
            let eig = nalgebra::linalg::SymmetricEigen::new(
                DMatrix::from_fn(4, 4, |i, j| {
                    // real 4×4 embedding of the hermitian 2×2 matrix
                    let z = out[(i % 2, j % 2)];
                    match (i / 2, j / 2) { (0, 0) | (1, 1) => z.re, (0, 1) => -z.im, _ => z.im }
                }),
            );
            prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12));
        }
    }
}
