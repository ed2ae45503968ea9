//! Register families, their decoherence-free branches and the checks for
//! unperturbed propagation of multi-DFS mixtures.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bath::{bath_integral, BathSpec, Integral};
use crate::coherent::{direction_average, BranchProfile, Direction, PhaseSum, PhaseTerm};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

pub const DEFAULT_CONDITION_TOL: f64 = 1e-10;
const MAX_INDIVIDUAL_QUBITS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegisterModel {
    SingleQubit {
        epsilon: f64,
    },
    /// `n` qubits sharing one coupling; DFS labels are total spin projections.
    WeakCollective {
        n: usize,
        epsilon: f64,
    },
    /// `n` qubits on a line, mode phase `e^{iσ n x t_s}` at site `n`.
    IndividualLinear {
        n: usize,
        t_s: f64,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DfsLabel {
    Up,
    Down,
    /// Sum of ±1 spins.
    Spin(i32),
    /// One ±1 entry per site.
    Spins(Vec<i8>),
}

impl fmt::Display for DfsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DfsLabel::Up => write!(f, "up"),
            DfsLabel::Down => write!(f, "down"),
            DfsLabel::Spin(j) => write!(f, "{j}"),
            DfsLabel::Spins(s) => {
                for &v in s {
                    f.write_str(if v > 0 { "+" } else { "-" })?;
                }
                Ok(())
            }
        }
    }
}

impl RegisterModel {
    pub fn name(&self) -> &'static str {
        match self {
            RegisterModel::SingleQubit { .. } => "single_qubit",
            RegisterModel::WeakCollective { .. } => "weak_collective",
            RegisterModel::IndividualLinear { .. } => "individual_linear",
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            RegisterModel::SingleQubit { epsilon }
            | RegisterModel::WeakCollective { epsilon, .. }
            | RegisterModel::IndividualLinear { epsilon, .. } => epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RegisterModel::SingleQubit { .. } => Ok(()),
            RegisterModel::WeakCollective { n: 0, .. } => Err(Error::domain("register needs ≥ 1 qubit")),
            RegisterModel::WeakCollective { .. } => Ok(()),
            RegisterModel::IndividualLinear { n, t_s, .. } => {
                if n == 0 || n > MAX_INDIVIDUAL_QUBITS {
                    return Err(Error::domain(format!(
                        "individual register size must be 1..={MAX_INDIVIDUAL_QUBITS}, got {n}"
                    )));
                }
                if !(t_s > 0.0) || !t_s.is_finite() {
                    return Err(Error::domain(format!("transit time must be > 0, got {t_s}")));
                }
                Ok(())
            }
        }
    }

    fn unknown(&self, label: &str) -> Error {
        Error::UnknownLabel { model: self.name().into(), label: label.into() }
    }

    /// Accepts `up`/`down` (also `↑`, `↓`, `+`, `-`) for a single qubit, an
    /// integer `J` for the collective register and a `+`/`-` string per site
    /// for the individual register.
    pub fn parse_label(&self, label: &str) -> Result<DfsLabel> {
        let t = label.trim();
        match *self {
            RegisterModel::SingleQubit { .. } => match t {
                "up" | "↑" | "+" | "+1" => Ok(DfsLabel::Up),
                "down" | "↓" | "-" | "-1" => Ok(DfsLabel::Down),
                _ => Err(self.unknown(label)),
            },
            RegisterModel::WeakCollective { n, .. } => {
                let j: i32 = t.parse().map_err(|_| self.unknown(label))?;
                if j.unsigned_abs() as usize > n || (j - n as i32).rem_euclid(2) != 0 {
                    return Err(self.unknown(label));
                }
                Ok(DfsLabel::Spin(j))
            }
            RegisterModel::IndividualLinear { n, .. } => {
                let spins: Option<Vec<i8>> = t
                    .chars()
                    .map(|c| match c {
                        '+' | 'u' | '↑' => Some(1),
                        '-' | 'd' | '↓' => Some(-1),
                        _ => None,
                    })
                    .collect();
                match spins {
                    Some(s) if s.len() == n => Ok(DfsLabel::Spins(s)),
                    _ => Err(self.unknown(label)),
                }
            }
        }
    }

    /// Every DFS label of the model.
    pub fn labels(&self) -> Vec<DfsLabel> {
        match *self {
            RegisterModel::SingleQubit { .. } => vec![DfsLabel::Up, DfsLabel::Down],
            RegisterModel::WeakCollective { n, .. } => {
                (0..=n).map(|k| DfsLabel::Spin(n as i32 - 2 * k as i32)).collect()
            }
            RegisterModel::IndividualLinear { n, .. } => (0..1usize << n)
                .map(|bits| DfsLabel::Spins((0..n).map(|k| if bits >> k & 1 == 0 { 1 } else { -1 }).collect()))
                .collect(),
        }
    }

    /// Normalized coupling `m_J(x, σ)` of a label.
    pub fn coupling(&self, label: &DfsLabel) -> Result<PhaseSum> {
        match (self, label) {
            (RegisterModel::SingleQubit { .. }, DfsLabel::Up) => Ok(PhaseSum::real(1.0)),
            (RegisterModel::SingleQubit { .. }, DfsLabel::Down) => Ok(PhaseSum::real(-1.0)),
            (RegisterModel::WeakCollective { n, .. }, DfsLabel::Spin(j))
                if j.unsigned_abs() as usize <= *n && (j - *n as i32).rem_euclid(2) == 0 =>
            {
                Ok(PhaseSum::real(*j as f64))
            }
            (RegisterModel::IndividualLinear { n, t_s, .. }, DfsLabel::Spins(s)) if s.len() == *n => {
                Ok(individual_coupling(s, *t_s))
            }
            _ => Err(self.unknown(&label.to_string())),
        }
    }
}

/// `Σ_n s_n e^{iσ n x t_s}`.
pub fn individual_coupling(spins: &[i8], t_s: f64) -> PhaseSum {
    PhaseSum::from_terms(
        spins
            .iter()
            .enumerate()
            .map(|(n, &s)| PhaseTerm::new(Complex64::new(s as f64, 0.0), n as f64 * t_s, 0.0))
            .collect(),
    )
}

/// `s'(n) = s((n − m) mod N)`.
pub fn cyclic_permutation<T: Copy>(spins: &[T], shift: usize) -> Vec<T> {
    let n = spins.len();
    (0..n).map(|k| spins[(k + n - shift % n.max(1)) % n]).collect()
}

/// `s'(n) = s((N − n + m) mod N)`.
pub fn mirror_permutation<T: Copy>(spins: &[T], shift: usize) -> Vec<T> {
    let n = spins.len();
    (0..n).map(|k| spins[(n - k + shift % n.max(1)) % n]).collect()
}

/// Stationary branch profiles for the given labels.
pub fn branch_profiles(model: &RegisterModel, labels: &[&str]) -> Result<Vec<BranchProfile>> {
    model.validate()?;
    labels
        .iter()
        .map(|l| {
            let parsed = model.parse_label(l)?;
            Ok(BranchProfile::stationary(parsed.to_string(), model.coupling(&parsed)?))
        })
        .collect()
}

/// Branch profiles with explicit initial displacements `b⁰`, one per label.
pub fn branch_profiles_with(
    model: &RegisterModel,
    labels: &[&str],
    displacements: &[PhaseSum],
) -> Result<Vec<BranchProfile>> {
    if displacements.len() != labels.len() {
        return Err(Error::domain(format!("{} displacements for {} labels", displacements.len(), labels.len())));
    }
    Ok(branch_profiles(model, labels)?
        .into_iter()
        .zip(displacements)
        .map(|(p, b0)| p.with_initial(b0.clone()))
        .collect())
}

pub use crate::coherent::energy_shift;

/// `Ω⁰_A − Ω⁰_B` from the subtracted integrand.
pub fn energy_shift_difference(a: &BranchProfile, b: &BranchProfile, bath: &BathSpec, grid: &FrequencyGrid) -> f64 {
    let diff = a.m.mul(&a.m.conj()).sub(&b.m.mul(&b.m.conj()));
    let Some(order) = diff.low_frequency_order() else { return 0.0 };
    bath_integral(
        |x| 0.5 * x * direction_average(|s| a.m.eval(x, s).norm_sqr() - b.m.eval(x, s).norm_sqr()),
        order + 1,
        bath,
        grid,
        false,
    )
    .finite()
    .expect("energy-shift integrand is integrable for d ≥ 1")
}

/// Matching energy shifts: `|Ω⁰_A − Ω⁰_B| ≤ tol·max(1, |Ω⁰_A|)`.
pub fn check_energy_shift_condition(
    a: &BranchProfile,
    b: &BranchProfile,
    bath: &BathSpec,
    grid: &FrequencyGrid,
    tol: f64,
) -> bool {
    let diff = energy_shift_difference(a, b, bath, grid);
    diff.abs() <= tol * energy_shift(a, bath, grid).abs().max(1.0)
}

fn shell_sum<F: Fn(Direction) -> Complex64>(f: F) -> Complex64 {
    Direction::BOTH.iter().map(|&s| f(s)).sum()
}

/// Phasing condition: `Σ_σ b⁰_A (m_A* − m_B*) = 0` on every grid shell, for
/// every ordered pair.
pub fn check_phasing_condition(profiles: &[BranchProfile], grid: &FrequencyGrid, tol: f64) -> bool {
    for a in profiles {
        for b in profiles {
            for &x in grid.nodes() {
                let v = shell_sum(|s| a.b0.eval(x, s) * (a.m.eval(x, s) - b.m.eval(x, s)).conj());
                if v.norm() > tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Both quasi-unitary constraint sums vanish on every shell for every pair.
pub fn check_quasi_unitary_conditions(profiles: &[BranchProfile], grid: &FrequencyGrid, tol: f64) -> bool {
    for (i, a) in profiles.iter().enumerate() {
        for b in &profiles[i + 1..] {
            for &x in grid.nodes() {
                let first =
                    shell_sum(|s| (a.b0.eval(x, s) - b.b0.eval(x, s)) * (a.m.eval(x, s) - b.m.eval(x, s)).conj());
                let second =
                    shell_sum(|s| a.m.eval(x, s).conj() * b.b0.eval(x, s) - b.m.eval(x, s).conj() * a.b0.eval(x, s));
                if first.norm() > tol || second.norm() > tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Stationary dissipative factor `Γ⁰ = ¼∫ w coth ⟨|m_A − m_B|²⟩ dx`.
pub fn gamma0_pair(a: &BranchProfile, b: &BranchProfile, bath: &BathSpec, grid: &FrequencyGrid) -> Integral {
    let dm = a.m.sub(&b.m);
    let Some(order) = dm.mul(&dm.conj()).low_frequency_order() else {
        return Integral::Finite(0.0);
    };
    bath_integral(
        |x| 0.25 * direction_average(|s| (a.m.eval(x, s) - b.m.eval(x, s)).norm_sqr()),
        order,
        bath,
        grid,
        true,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub model: String,
    pub labels: Vec<String>,
    pub energy_shift_ok: bool,
    pub phasing_ok: bool,
    /// Largest Γ⁰ over distinct label pairs.
    pub gamma0: Integral,
    pub overall_df: bool,
}

impl ConditionReport {
    pub fn to_json(&self) -> Value {
        let gamma0 = match self.gamma0 {
            Integral::Finite(v) => json!(v),
            Integral::Divergent { .. } => json!("divergent"),
        };
        json!({
            "model": self.model,
            "labels": self.labels,
            "energy_shift_ok": self.energy_shift_ok,
            "phasing_ok": self.phasing_ok,
            "gamma0": gamma0,
            "overall_df": self.overall_df,
        })
    }
}

/// All three decoherence-free conditions for a set of branches.
/// `displacements`, when given, supplies `b⁰` per label (stationary otherwise).
pub fn full_df_report(
    model: &RegisterModel,
    labels: &[&str],
    displacements: Option<&[PhaseSum]>,
    bath: &BathSpec,
    grid: &FrequencyGrid,
    tol: f64,
) -> Result<ConditionReport> {
    let profiles = match displacements {
        Some(d) => branch_profiles_with(model, labels, d)?,
        None => branch_profiles(model, labels)?,
    };
    let mut energy_shift_ok = true;
    let mut gamma0 = Integral::Finite(0.0);
    for (i, a) in profiles.iter().enumerate() {
        for b in &profiles[i + 1..] {
            energy_shift_ok &= check_energy_shift_condition(a, b, bath, grid, tol);
            gamma0 = match (gamma0, gamma0_pair(a, b, bath, grid)) {
                (Integral::Divergent { exponent }, _) | (_, Integral::Divergent { exponent }) => {
                    Integral::Divergent { exponent }
                }
                (Integral::Finite(u), Integral::Finite(v)) => Integral::Finite(u.max(v)),
            };
        }
    }
    let phasing_ok = check_phasing_condition(&profiles, grid, tol);
    let overall_df = energy_shift_ok && phasing_ok && gamma0.is_finite();
    Ok(ConditionReport {
        model: model.name().into(),
        labels: profiles.iter().map(|p| p.label.clone()).collect(),
        energy_shift_ok,
        phasing_ok,
        gamma0,
        overall_df,
    })
}
