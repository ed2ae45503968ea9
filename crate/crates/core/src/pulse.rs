//! Bang-bang control of a single qubit: instantaneous π-pulses flip the sign
//! of the entangled bath displacement.
//!
//! Only the up-branch `b(x,τ)` is tracked (the down-branch is its negative),
//! so the pair dissipative factor is `Γ = ∫ w coth |b|² dx`, the Φ and ΔΘ
//! phases vanish and `η = e^{−Γ}`.
//!
//! Read-outs sit at `τ_n = 2nΔτ`. With `φ = xΔτ`, `E = e^{−iφ}`, the read-out
//! displacements obey `b_{n+1} = b_n E² + c` and sum to
//!
//! ```text
//! standard:     b_n = (1 − E)² e^{−i(n−1)φ} U_{n−1}(cos φ)
//! symmetrized:  b_n = −(e^{−iφ/2} − 1)² (1 − E) e^{−i(n−1)φ} U_{n−1}(cos φ)
//! ```
//!
//! with `U` the Chebyshev polynomials of the second kind. These equal the
//! `|e^{−2inφ} − 1|·tan(φ/2)` forms but have no removable poles.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{classify_convergence, BathSpec};
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, GridOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Free,
    /// Flips at `(2k+1)Δτ` and `(2k+2)Δτ`.
    Standard,
    /// Flips at `2kΔτ + Δτ/2` and `2kΔτ + 3Δτ/2`.
    SymmetrizedCP,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Free => "free",
            Protocol::Standard => "standard",
            Protocol::SymmetrizedCP => "symmetrized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "free" => Ok(Protocol::Free),
            "standard" | "bangbang" | "bang-bang" => Ok(Protocol::Standard),
            "symmetrized" | "symmetrized_cp" | "symmetrized-cp" | "cp" => Ok(Protocol::SymmetrizedCP),
            other => Err(Error::Protocol(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    protocol: Protocol,
    dt: f64,
    n_cycles: usize,
}

impl PulseSchedule {
    pub fn free() -> Self {
        Self { protocol: Protocol::Free, dt: f64::INFINITY, n_cycles: 0 }
    }

    pub fn standard(dt: f64, n_cycles: usize) -> Result<Self> {
        Self::new(Protocol::Standard, dt, n_cycles)
    }

    pub fn symmetrized(dt: f64, n_cycles: usize) -> Result<Self> {
        Self::new(Protocol::SymmetrizedCP, dt, n_cycles)
    }

    pub fn new(protocol: Protocol, dt: f64, n_cycles: usize) -> Result<Self> {
        if protocol == Protocol::Free {
            return Ok(Self::free());
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("half-cycle Δτ must be > 0, got {dt}")));
        }
        Ok(Self { protocol, dt, n_cycles })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    /// Half-cycle `Δτ` (infinite for free evolution).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_cycles(&self) -> usize {
        self.n_cycles
    }

    /// Same pulse pattern with a different cycle count.
    pub fn with_cycles(&self, n_cycles: usize) -> Self {
        Self { n_cycles, ..*self }
    }

    /// Time of the `i`-th flip (0-based) of the unbounded pulse train.
    fn nth_flip(&self, i: usize) -> f64 {
        match self.protocol {
            Protocol::Free => f64::INFINITY,
            Protocol::Standard => (i + 1) as f64 * self.dt,
            // (2k + 1/2)Δτ and (2k + 3/2)Δτ, i.e. odd multiples of Δτ/2
            Protocol::SymmetrizedCP => (2 * i + 1) as f64 * self.dt * 0.5,
        }
    }

    /// Ordered flip times of the `n_cycles` cycles.
    pub fn flip_times(&self) -> Vec<f64> {
        if self.protocol == Protocol::Free {
            return Vec::new();
        }
        (0..2 * self.n_cycles).map(|i| self.nth_flip(i)).collect()
    }

    /// `2kΔτ`, `k = 0..=n_cycles`.
    pub fn readout_times(&self) -> Vec<f64> {
        if self.protocol == Protocol::Free {
            return vec![0.0];
        }
        (0..=self.n_cycles).map(|k| (2 * k) as f64 * self.dt).collect()
    }

    /// Flips strictly before `tau` (`inclusive = false`) or at/before it.
    /// The pulse train is treated as unbounded in time; `n_cycles` only sets
    /// the span of [`flip_times`](Self::flip_times).
    fn flips_until(&self, tau: f64, inclusive: bool) -> Vec<f64> {
        if self.protocol == Protocol::Free {
            return Vec::new();
        }
        (0..).map(|i| self.nth_flip(i)).take_while(|&t| t < tau || (inclusive && t == tau)).collect()
    }

    fn validate_for_closed_form(&self) -> Result<()> {
        if self.protocol == Protocol::Free {
            return Err(Error::Protocol("stroboscopic quantities need a pulsed protocol".into()));
        }
        Ok(())
    }
}

/// Which one-sided limit to take at a flip time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Before,
    After,
}

fn free_segment(b: Complex64, x: f64, dtau: f64) -> Complex64 {
    (b + 1.0) * Complex64::cis(-x * dtau) - 1.0
}

fn piecewise(schedule: &PulseSchedule, x: f64, tau: f64, side: Side) -> Complex64 {
    let mut b = Complex64::new(0.0, 0.0);
    let mut t = 0.0;
    for flip in schedule.flips_until(tau, side == Side::After) {
        b = -free_segment(b, x, flip - t);
        t = flip;
    }
    free_segment(b, x, tau - t)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("time must be ≥ 0, got {tau}")));
    }
    Ok(())
}

/// Up-branch displacement at `tau`, built segment by segment from `b = 0`;
/// at a flip time this is the limit from the left.
pub fn displacement_with_pulses(schedule: &PulseSchedule, x: f64, tau: f64) -> Result<Complex64> {
    check_tau(tau)?;
    Ok(piecewise(schedule, x, tau, Side::Before))
}

/// Limit from the right (after any flip at `tau`).
pub fn displacement_after(schedule: &PulseSchedule, x: f64, tau: f64) -> Result<Complex64> {
    check_tau(tau)?;
    Ok(piecewise(schedule, x, tau, Side::After))
}

/// Additive term `c` of the read-out recurrence `b_{n+1} = b_n e^{−2ixΔτ} + c`.
pub fn strobe_increment(protocol: Protocol, x: f64, dt: f64) -> Result<Complex64> {
    let e = Complex64::cis(-x * dt);
    match protocol {
        Protocol::Standard => Ok((e - 1.0) * (e - 1.0)),
        Protocol::SymmetrizedCP => {
            let h = Complex64::cis(-0.5 * x * dt);
            Ok((h - 1.0) * (h - 1.0) * (e - 1.0))
        }
        Protocol::Free => Err(Error::Protocol("free evolution has no stroboscopic recurrence".into())),
    }
}

/// Read-out displacements on a set of frequency nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StroboscopicState {
    pub n: usize,
    pub xs: Vec<f64>,
    pub b: Vec<Complex64>,
}

impl StroboscopicState {
    /// Uncorrelated start, `b = 0` everywhere.
    pub fn initial(xs: &[f64]) -> Self {
        Self { n: 0, xs: xs.to_vec(), b: vec![Complex64::new(0.0, 0.0); xs.len()] }
    }
}

/// One cycle of the read-out recurrence.
pub fn strobe_step(state: &StroboscopicState, schedule: &PulseSchedule) -> Result<StroboscopicState> {
    schedule.validate_for_closed_form()?;
    let dt = schedule.dt();
    let b = state
        .xs
        .iter()
        .zip(&state.b)
        .map(|(&x, &b)| Ok(b * Complex64::cis(-2.0 * x * dt) + strobe_increment(schedule.protocol(), x, dt)?))
        .collect::<Result<_>>()?;
    Ok(StroboscopicState { n: state.n + 1, xs: state.xs.clone(), b })
}

/// `U_{k}(c)`, Chebyshev polynomial of the second kind.
pub fn chebyshev_u(k: usize, c: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for _ in 0..k {
        let next = 2.0 * c * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `V_{k}(c)`, Chebyshev polynomial of the third kind (`V_0 = 1`, `V_1 = 2c − 1`).
pub fn chebyshev_v(k: usize, c: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 2.0 * c - 1.0);
    for _ in 1..k {
        let next = 2.0 * c * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Successive values `P_k(cos φ)` of a solution of `P_{k+1} = 2cos φ P_k − P_{k−1}`,
/// stepped in Reinsch's form: the recurrence runs on the first difference
/// (cos φ ≥ 0) or the first sum (cos φ < 0), driven by `cos φ ∓ 1` taken from
/// half-angle functions. The plain recurrence loses accuracy like `k³ ε`
/// next to `cos φ = ±1`.
#[derive(Debug, Clone, Copy)]
struct ChebyshevStepper {
    cur: f64,
    /// `P_k − P_{k−1}` or `P_k + P_{k−1}`.
    aux: f64,
    near_one: bool,
    /// `2(cos φ − 1)` or `2(cos φ + 1)`.
    shift: f64,
}

impl ChebyshevStepper {
    /// Second kind, `U_{−1} = 0`.
    fn second_kind(phi: f64) -> Self {
        Self::start(phi, 0.0)
    }

    /// Third kind, `V_{−1} = 1`.
    fn third_kind(phi: f64) -> Self {
        Self::start(phi, 1.0)
    }

    /// `P_0 = 1` with the given `P_{−1}`.
    fn start(phi: f64, p_prev: f64) -> Self {
        if phi.cos() >= 0.0 {
            let shift = -4.0 * (0.5 * phi).sin().powi(2);
            Self { cur: 1.0, aux: 1.0 - p_prev, near_one: true, shift }
        } else {
            let shift = 4.0 * (0.5 * phi).cos().powi(2);
            Self { cur: 1.0, aux: 1.0 + p_prev, near_one: false, shift }
        }
    }

    fn value(&self) -> f64 {
        self.cur
    }

    fn step(&mut self) {
        if self.near_one {
            self.aux += self.shift * self.cur;
            self.cur += self.aux;
        } else {
            self.aux = self.shift * self.cur - self.aux;
            self.cur = self.aux - self.cur;
        }
    }

    fn nth(mut self, k: usize) -> f64 {
        for _ in 0..k {
            self.step();
        }
        self.cur
    }
}

/// `U_k(cos φ)`, accurate also where `cos φ` is close to `±1`.
pub fn chebyshev_u_cos(k: usize, phi: f64) -> f64 {
    ChebyshevStepper::second_kind(phi).nth(k)
}

/// `V_k(cos φ)`, accurate also where `cos φ` is close to `±1`.
pub fn chebyshev_v_cos(k: usize, phi: f64) -> f64 {
    ChebyshevStepper::third_kind(phi).nth(k)
}

/// Closed-form read-out displacement `b_n` of the standard protocol.
pub fn standard_closed_form(x: f64, dt: f64, n: usize) -> Complex64 {
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let phi = x * dt;
    let one_minus = Complex64::new(1.0, 0.0) - Complex64::cis(-phi);
    one_minus * one_minus * Complex64::cis(-((n - 1) as f64) * phi) * chebyshev_u_cos(n - 1, phi)
}

/// Closed-form read-out displacement `b_n` of the symmetrized protocol.
pub fn symmetrized_closed_form(x: f64, dt: f64, n: usize) -> Complex64 {
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let phi = x * dt;
    let h1 = Complex64::cis(-0.5 * phi) - 1.0;
    let one_minus = Complex64::new(1.0, 0.0) - Complex64::cis(-phi);
    -(h1 * h1) * one_minus * Complex64::cis(-((n - 1) as f64) * phi) * chebyshev_u_cos(n - 1, phi)
}

/// `|b_n|` in the literal tangent form `|e^{−2inφ} − 1|·|tan(φ/2)|`.
/// Ill-conditioned next to `φ = (2k+1)π`.
pub fn standard_modulus_tan_form(x: f64, dt: f64, n: usize) -> f64 {
    let phi = x * dt;
    (Complex64::cis(-2.0 * n as f64 * phi) - 1.0).norm() * (0.5 * phi).tan().abs()
}

/// `|b_n|` in the literal form `|e^{−2inφ} − 1|·(1 − cos(φ/2))/|cos(φ/2)|`.
pub fn symmetrized_modulus_tan_form(x: f64, dt: f64, n: usize) -> f64 {
    let phi = x * dt;
    let c = (0.5 * phi).cos();
    (Complex64::cis(-2.0 * n as f64 * phi) - 1.0).norm() * (1.0 - c) / c.abs()
}

/// Low-frequency power of `|b|²` for a qubit starting unentangled: `b` itself
/// vanishes linearly at `x = 0` for any schedule.
const DISPLACEMENT_SQ_ORDER: i32 = 2;

fn weighted_integral<F: Fn(f64) -> f64 + Sync>(f: F, order: i32, bath: &BathSpec, grid: &FrequencyGrid) -> Result<f64> {
    let verdict = classify_convergence(order, bath, true);
    if !verdict.finite {
        return Err(Error::Divergent { exponent: verdict.exponent });
    }
    Ok(grid.integrate(|x| bath.weight(x) * bath.coth(x) * f(x)))
}

/// Read-out dissipative factor `Γ(2nΔτ)` of the standard protocol, from the
/// closed form.
pub fn gamma_strob(schedule: &PulseSchedule, n: usize, bath: &BathSpec, grid: &FrequencyGrid) -> Result<f64> {
    if schedule.protocol() != Protocol::Standard {
        return Err(Error::Protocol("gamma_strob needs the standard protocol".into()));
    }
    let dt = schedule.dt();
    weighted_integral(|x| standard_closed_form(x, dt, n).norm_sqr(), DISPLACEMENT_SQ_ORDER, bath, grid)
}

/// Read-out dissipative factor `Γ(2nΔτ)` of the symmetrized protocol.
pub fn gamma_sym(schedule: &PulseSchedule, n: usize, bath: &BathSpec, grid: &FrequencyGrid) -> Result<f64> {
    if schedule.protocol() != Protocol::SymmetrizedCP {
        return Err(Error::Protocol("gamma_sym needs the symmetrized protocol".into()));
    }
    let dt = schedule.dt();
    weighted_integral(|x| symmetrized_closed_form(x, dt, n).norm_sqr(), DISPLACEMENT_SQ_ORDER, bath, grid)
}

/// Read-out Γ from the literal tangent forms, with nodes closer than `1e−9`
/// to a pole moved by half the local node spacing.
pub fn gamma_readout_tan_form(
    schedule: &PulseSchedule,
    n: usize,
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<f64> {
    schedule.validate_for_closed_form()?;
    let verdict = classify_convergence(DISPLACEMENT_SQ_ORDER, bath, true);
    if !verdict.finite {
        return Err(Error::Divergent { exponent: verdict.exponent });
    }
    let dt = schedule.dt();
    let nodes = grid.nodes();
    let modulus = |x: f64| match schedule.protocol() {
        Protocol::Standard => standard_modulus_tan_form(x, dt, n),
        _ => symmetrized_modulus_tan_form(x, dt, n),
    };
    let mut sum = 0.0;
    for (i, (&x, &w)) in nodes.iter().zip(grid.weights()).enumerate() {
        // poles of both forms sit at xΔτ = (2k+1)π
        let k = ((x * dt / PI - 1.0) / 2.0).round();
        let pole = (2.0 * k + 1.0) * PI / dt;
        let xe = if (x - pole).abs() < 1e-9 {
            let spacing = if i + 1 < nodes.len() { nodes[i + 1] - x } else { x - nodes[i - 1] };
            x + 0.5 * spacing
        } else {
            x
        };
        sum += w * bath.weight(x) * bath.coth(x) * modulus(xe).powi(2);
    }
    Ok(sum)
}

/// `Γ(2nΔτ)` for `n = 0..=n_cycles` in one sweep over the grid.
pub fn gamma_readout_series(schedule: &PulseSchedule, bath: &BathSpec, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    schedule.validate_for_closed_form()?;
    let verdict = classify_convergence(DISPLACEMENT_SQ_ORDER, bath, true);
    if !verdict.finite {
        return Err(Error::Divergent { exponent: verdict.exponent });
    }
    let n_cycles = schedule.n_cycles();
    let dt = schedule.dt();
    let protocol = schedule.protocol();
    let per_node: Vec<Vec<f64>> = grid
        .nodes()
        .par_iter()
        .zip(grid.weights())
        .map(|(&x, &w)| {
            let phi = x * dt;
            // |b_n|² = prefactor · U_{n−1}(cos φ)²
            let prefactor = match protocol {
                Protocol::Standard => 16.0 * (0.5 * phi).sin().powi(4),
                _ => 64.0 * (0.25 * phi).sin().powi(4) * (0.5 * phi).sin().powi(2),
            };
            let scale = w * bath.weight(x) * bath.coth(x) * prefactor;
            let mut out = Vec::with_capacity(n_cycles + 1);
            out.push(0.0);
            let mut u = ChebyshevStepper::second_kind(phi);
            for _ in 1..=n_cycles {
                out.push(scale * u.value().powi(2));
                u.step();
            }
            out
        })
        .collect();
    let mut series = vec![0.0; n_cycles + 1];
    for node in &per_node {
        for (acc, v) in series.iter_mut().zip(node) {
            *acc += v;
        }
    }
    Ok(series)
}

/// Γ(τ) from the piecewise displacement; continuous in τ.
pub fn gamma_continuous(schedule: &PulseSchedule, tau: f64, bath: &BathSpec, grid: &FrequencyGrid) -> Result<f64> {
    check_tau(tau)?;
    weighted_integral(|x| piecewise(schedule, x, tau, Side::Before).norm_sqr(), DISPLACEMENT_SQ_ORDER, bath, grid)
}

/// Γ at each of the ascending `times`, propagating every node forward once.
pub fn gamma_continuous_series(
    schedule: &PulseSchedule,
    times: &[f64],
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<Vec<f64>> {
    for &t in times {
        check_tau(t)?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("sample times must be ascending"));
    }
    let verdict = classify_convergence(DISPLACEMENT_SQ_ORDER, bath, true);
    if !verdict.finite {
        return Err(Error::Divergent { exponent: verdict.exponent });
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let flips = schedule.flips_until(t_end, false);
    let per_node: Vec<Vec<f64>> = grid
        .nodes()
        .par_iter()
        .zip(grid.weights())
        .map(|(&x, &w)| {
            let scale = w * bath.weight(x) * bath.coth(x);
            let mut b = Complex64::new(0.0, 0.0);
            let mut t = 0.0;
            let mut next_flip = 0;
            times
                .iter()
                .map(|&target| {
                    while next_flip < flips.len() && flips[next_flip] < target {
                        b = -free_segment(b, x, flips[next_flip] - t);
                        t = flips[next_flip];
                        next_flip += 1;
                    }
                    b = free_segment(b, x, target - t);
                    t = target;
                    scale * b.norm_sqr()
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; times.len()];
    for node in &per_node {
        for (acc, v) in out.iter_mut().zip(node) {
            *acc += v;
        }
    }
    Ok(out)
}

/// One-sided `dΓ/dτ = −2∫ w coth x Im b dx` from the piecewise displacement.
pub fn gamma_rate(
    schedule: &PulseSchedule,
    tau: f64,
    side: Side,
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<f64> {
    check_tau(tau)?;
    // x·Im b vanishes as x² at low frequency
    weighted_integral(|x| -2.0 * x * piecewise(schedule, x, tau, side).im, 2, bath, grid)
}

/// `dΓ/dτ` just before every flip of the schedule, in one pass over the grid.
/// A flip negates `b`, so the rate just after is the negative of this.
pub fn flip_rates(schedule: &PulseSchedule, bath: &BathSpec, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    schedule.validate_for_closed_form()?;
    let verdict = classify_convergence(2, bath, true);
    if !verdict.finite {
        return Err(Error::Divergent { exponent: verdict.exponent });
    }
    let flips = schedule.flip_times();
    let per_node: Vec<Vec<f64>> = grid
        .nodes()
        .par_iter()
        .zip(grid.weights())
        .map(|(&x, &w)| {
            let scale = -2.0 * x * w * bath.weight(x) * bath.coth(x);
            let mut b = Complex64::new(0.0, 0.0);
            let mut t = 0.0;
            flips
                .iter()
                .map(|&f| {
                    b = free_segment(b, x, f - t);
                    t = f;
                    let rate = scale * b.im;
                    b = -b;
                    rate
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; flips.len()];
    for node in &per_node {
        for (acc, v) in out.iter_mut().zip(node) {
            *acc += v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalDiagnostics {
    /// `dΓ/dτ` right after the mid-cycle pulse at `(2n−1)Δτ`.
    pub d_gamma_after_midpulse: f64,
    /// `dΓ/dτ` right before the cycle-closing pulse at `2nΔτ`.
    pub d_gamma_before_second: f64,
}

/// Closed-form one-sided derivatives of Γ around the pulses of cycle `n ≥ 1`
/// (standard protocol):
///
/// ```text
/// after  (2n−1)Δτ: −2 ∫ w coth x sin φ V_{n−1}(cos φ)² dx
/// before 2nΔτ:     +8 ∫ w coth x sin²(φ/2) sin φ U_{n−1}(cos φ)² dx
/// ```
pub fn revival_diagnostics(
    schedule: &PulseSchedule,
    bath: &BathSpec,
    grid: &FrequencyGrid,
    n: usize,
) -> Result<RevivalDiagnostics> {
    if schedule.protocol() != Protocol::Standard {
        return Err(Error::Protocol("revival diagnostics are defined for the standard protocol".into()));
    }
    if n == 0 {
        return Err(Error::domain("cycle index must be ≥ 1"));
    }
    let dt = schedule.dt();
    let after = weighted_integral(
        |x| {
            let phi = x * dt;
            -2.0 * x * phi.sin() * chebyshev_v_cos(n - 1, phi).powi(2)
        },
        2,
        bath,
        grid,
    )?;
    let before = weighted_integral(
        |x| {
            let phi = x * dt;
            8.0 * x * (0.5 * phi).sin().powi(2) * phi.sin() * chebyshev_u_cos(n - 1, phi).powi(2)
        },
        4,
        bath,
        grid,
    )?;
    Ok(RevivalDiagnostics { d_gamma_after_midpulse: after, d_gamma_before_second: before })
}

/// Grid resolving every oscillation up to `tau_max` for this schedule.
pub fn pulse_grid(bath: &BathSpec, schedule: &PulseSchedule, tau_max: f64, nodes: usize) -> Result<FrequencyGrid> {
    let mut options = GridOptions { nodes, ..GridOptions::default() }.with_max_rate(tau_max);
    if schedule.protocol() != Protocol::Free {
        options = options.with_dt_min(schedule.dt());
    }
    FrequencyGrid::for_bath(bath, &options)
}

/// One row of a bang-bang trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub tau: f64,
    pub gamma: f64,
    pub eta_abs: f64,
}

pub const PULSE_TRACE_COLUMNS: [&str; 8] = ["tau", "gamma", "eta_abs", "protocol", "dt", "theta", "d", "lambda"];
pub const SWEEP_COLUMNS: [&str; 5] = ["freq_ratio", "n_cycles", "eta_strob", "eta_sym", "theta"];

/// Sample times covering `n_cycles` cycles with `per_interval` points in
/// every inter-pulse interval (pulse and read-out times included).
pub fn trace_times(schedule: &PulseSchedule, per_interval: usize) -> Vec<f64> {
    let mut knots = vec![0.0];
    knots.extend(schedule.flip_times());
    knots.extend(schedule.readout_times());
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let per = per_interval.max(1);
    let mut times = Vec::new();
    for w in knots.windows(2) {
        for k in 0..per {
            times.push(w[0] + (w[1] - w[0]) * k as f64 / per as f64);
        }
    }
    times.push(*knots.last().unwrap());
    times
}

pub fn pulse_trace(
    schedule: &PulseSchedule,
    times: &[f64],
    bath: &BathSpec,
    grid: &FrequencyGrid,
) -> Result<Vec<TracePoint>> {
    let gamma = gamma_continuous_series(schedule, times, bath, grid)?;
    Ok(times.iter().zip(gamma).map(|(&tau, g)| TracePoint { tau, gamma: g, eta_abs: (-g).exp() }).collect())
}

/// One row of the read-out error sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Pulse frequency `1/Δτ` in units of ω_c.
    pub freq_ratio: f64,
    pub n_cycles: usize,
    pub eta_strob: f64,
    pub eta_sym: f64,
    pub theta: f64,
}

/// Read-out η of both protocols at the fixed time `total_time`, for
/// `n = 1..=max_cycles` cycles (Δτ = total_time / 2n).
pub fn readout_sweep(total_time: f64, max_cycles: usize, bath: &BathSpec, nodes: usize) -> Result<Vec<SweepPoint>> {
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(Error::domain(format!("sweep time must be > 0, got {total_time}")));
    }
    (1..=max_cycles)
        .into_par_iter()
        .map(|n| {
            let dt = total_time / (2.0 * n as f64);
            let strob = PulseSchedule::standard(dt, n)?;
            let sym = PulseSchedule::symmetrized(dt, n)?;
            let grid = pulse_grid(bath, &strob, total_time, nodes)?;
            Ok(SweepPoint {
                // 1/Δτ, formed without the round trip through Δτ
                freq_ratio: 2.0 * n as f64 / total_time,
                n_cycles: n,
                eta_strob: (-gamma_strob(&strob, n, bath, &grid)?).exp(),
                eta_sym: (-gamma_sym(&sym, n, bath, &grid)?).exp(),
                theta: bath.theta(),
            })
        })
        .collect()
}
