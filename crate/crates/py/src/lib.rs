//! Python bindings for the `coherent-dfs` core.
//!
//! Divergent integrals come back as `inf` (Γ) or raise `DivergentError`
//! where no finite answer exists; invalid input raises `ValueError`.

use coherent_dfs::dfs::{branch_profiles, full_df_report, gamma0_pair, RegisterModel, DEFAULT_CONDITION_TOL};
use coherent_dfs::fock::{eta_discrete, fock_oracle_eta, DiscreteMode, FockOracleConfig, DEFAULT_ORACLE_TOL};
use coherent_dfs::pulse::{self, Protocol, PulseSchedule};
use coherent_dfs::{BranchProfile, Direction, Error, FrequencyGrid, GridOptions, Integral, PhaseSum};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(coherent_dfs_py, DivergentError, PyValueError);
create_exception!(coherent_dfs_py, UnconvergedError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Divergent { .. } => DivergentError::new_err(e.to_string()),
        Error::Unconverged { .. } => UnconvergedError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn finite_or_inf(v: Integral) -> f64 {
    v.finite().unwrap_or(f64::INFINITY)
}

/// Ohmic-family bath `w_d(x) = λ x^(d-2) e^(-x)` at temperature θ.
#[pyclass(name = "BathSpec", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyBath(coherent_dfs::BathSpec);

#[pymethods]
impl PyBath {
    #[new]
    fn new(d: u8, lam: f64, theta: f64) -> PyResult<Self> {
        coherent_dfs::BathSpec::new(d, lam, theta).map(PyBath).map_err(py_err)
    }

    #[getter]
    fn d(&self) -> u8 {
        self.0.d()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    fn weight(&self, x: f64) -> f64 {
        self.0.weight(x)
    }

    fn coth(&self, x: f64) -> f64 {
        self.0.coth(x)
    }

    fn __repr__(&self) -> String {
        format!("BathSpec(d={}, lam={:?}, theta={:?})", self.0.d(), self.0.lambda(), self.0.theta())
    }
}

fn grid(bath: &PyBath, max_rate: f64, nodes: Option<usize>) -> PyResult<FrequencyGrid> {
    let mut options = GridOptions::default().with_max_rate(max_rate);
    if let Some(n) = nodes {
        options.nodes = n;
    }
    FrequencyGrid::for_bath(&bath.0, &options).map_err(py_err)
}

fn model(name: &str, n: Option<usize>, t_s: Option<f64>, epsilon: f64) -> PyResult<RegisterModel> {
    let need_n = || n.ok_or_else(|| PyValueError::new_err(format!("model `{name}` needs n")));
    let m = match name {
        "single_qubit" => RegisterModel::SingleQubit { epsilon },
        "weak_collective" => RegisterModel::WeakCollective { n: need_n()?, epsilon },
        "individual_linear" => RegisterModel::IndividualLinear {
            n: need_n()?,
            t_s: t_s.ok_or_else(|| PyValueError::new_err("model `individual_linear` needs t_s"))?,
            epsilon,
        },
        other => return Err(PyValueError::new_err(format!("unknown model `{other}`"))),
    };
    m.validate().map_err(py_err)?;
    Ok(m)
}

type Trace = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<Complex64>);

fn coupling_rate(model: &RegisterModel) -> f64 {
    match *model {
        RegisterModel::IndividualLinear { n, t_s, .. } => n as f64 * t_s,
        _ => 0.0,
    }
}

/// Coherence of a single qubit's up/down branches. Returns
/// `(gamma, phi, dtheta, eta)` lists aligned with `times`.
#[pyfunction]
#[pyo3(signature = (bath, times, stationary=false, nodes=None))]
fn free_decay(bath: PyBath, times: Vec<f64>, stationary: bool, nodes: Option<usize>) -> PyResult<Trace> {
    let tau_max = times.iter().copied().fold(0.0, f64::max);
    let g = grid(&bath, tau_max, nodes)?;
    let up = BranchProfile::single_qubit(true, stationary);
    let down = BranchProfile::single_qubit(false, stationary);
    let t = coherent_dfs::CoherenceTrace::compute(&up, &down, &times, &bath.0, &g).map_err(py_err)?;
    Ok((t.gamma, t.phi, t.dtheta, t.eta))
}

/// Stationary dissipative factor Γ⁰ of two register branches (`inf` if divergent).
#[pyfunction]
#[pyo3(signature = (bath, labels, model="single_qubit", n=None, t_s=None, epsilon=1.0, nodes=None))]
fn gamma0(
    bath: PyBath,
    labels: (String, String),
    model: &str,
    n: Option<usize>,
    t_s: Option<f64>,
    epsilon: f64,
    nodes: Option<usize>,
) -> PyResult<f64> {
    let m = self::model(model, n, t_s, epsilon)?;
    let p = branch_profiles(&m, &[labels.0.as_str(), labels.1.as_str()]).map_err(py_err)?;
    let g = grid(&bath, coupling_rate(&m), nodes)?;
    Ok(finite_or_inf(gamma0_pair(&p[0], &p[1], &bath.0, &g)))
}

/// Decoherence-free conditions: `(energy_shift_ok, phasing_ok, gamma0, overall_df)`.
#[pyfunction]
#[pyo3(signature = (bath, labels, model="single_qubit", n=None, t_s=None, epsilon=1.0, displacements=None, tol=DEFAULT_CONDITION_TOL, nodes=None))]
#[allow(clippy::too_many_arguments)]
fn dfs_report(
    bath: PyBath,
    labels: Vec<String>,
    model: &str,
    n: Option<usize>,
    t_s: Option<f64>,
    epsilon: f64,
    displacements: Option<Vec<Complex64>>,
    tol: f64,
    nodes: Option<usize>,
) -> PyResult<(bool, bool, f64, bool)> {
    let m = self::model(model, n, t_s, epsilon)?;
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let offsets: Option<Vec<PhaseSum>> = displacements.map(|v| v.into_iter().map(PhaseSum::constant).collect());
    let g = grid(&bath, coupling_rate(&m), nodes)?;
    let r = full_df_report(&m, &refs, offsets.as_deref(), &bath.0, &g, tol).map_err(py_err)?;
    Ok((r.energy_shift_ok, r.phasing_ok, finite_or_inf(r.gamma0), r.overall_df))
}

fn schedule(protocol: &str, dt: f64, n_cycles: usize) -> PyResult<PulseSchedule> {
    let p = Protocol::parse(protocol).map_err(py_err)?;
    if p == Protocol::Free {
        return Err(PyValueError::new_err("a pulsed protocol is required"));
    }
    PulseSchedule::new(p, dt, n_cycles).map_err(py_err)
}

/// Γ(τ) under a pulse train, sampled `per_interval` times between knots.
/// Returns `(tau, gamma)` lists.
#[pyfunction]
#[pyo3(signature = (bath, protocol, dt, n_cycles, per_interval=20, nodes=None))]
fn pulse_trace(
    bath: PyBath,
    protocol: &str,
    dt: f64,
    n_cycles: usize,
    per_interval: usize,
    nodes: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = schedule(protocol, dt, n_cycles)?;
    let g = pulse::pulse_grid(&bath.0, &s, 2.0 * n_cycles as f64 * dt, nodes.unwrap_or(GridOptions::default().nodes))
        .map_err(py_err)?;
    let trace = pulse::pulse_trace(&s, &pulse::trace_times(&s, per_interval), &bath.0, &g).map_err(py_err)?;
    Ok(trace.iter().map(|p| (p.tau, p.gamma)).unzip())
}

/// Γ at the read-out times `0, 2Δτ, …, 2nΔτ`.
#[pyfunction]
#[pyo3(signature = (bath, protocol, dt, n_cycles, nodes=None))]
fn readout_gammas(bath: PyBath, protocol: &str, dt: f64, n_cycles: usize, nodes: Option<usize>) -> PyResult<Vec<f64>> {
    let s = schedule(protocol, dt, n_cycles)?;
    let g = pulse::pulse_grid(&bath.0, &s, 2.0 * n_cycles as f64 * dt, nodes.unwrap_or(GridOptions::default().nodes))
        .map_err(py_err)?;
    pulse::gamma_readout_series(&s, &bath.0, &g).map_err(py_err)
}

/// Read-out η of both protocols at fixed total time for 1..=max_cycles cycles.
/// Returns `(freq_ratio, eta_strob, eta_sym)` lists.
#[pyfunction]
#[pyo3(signature = (bath, total_time=20.0, max_cycles=50, nodes=None))]
fn readout_sweep(
    bath: PyBath,
    total_time: f64,
    max_cycles: usize,
    nodes: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let pts = pulse::readout_sweep(total_time, max_cycles, &bath.0, nodes.unwrap_or(GridOptions::default().nodes))
        .map_err(py_err)?;
    Ok((
        pts.iter().map(|p| p.freq_ratio).collect(),
        pts.iter().map(|p| p.eta_strob).collect(),
        pts.iter().map(|p| p.eta_sym).collect(),
    ))
}

/// Truncated-Fock η for discrete modes `(x, rho, sigma)` with constant
/// couplings and initial displacements, raising `UnconvergedError` past `n_cap`.
/// Returns `(eta_oracle, eta_analytic, n_max)`.
#[pyfunction]
#[pyo3(signature = (theta, modes, tau, m_a=Complex64::new(1.0, 0.0), m_b=Complex64::new(-1.0, 0.0), b0_a=None, b0_b=None, tol=DEFAULT_ORACLE_TOL, n_cap=None))]
#[allow(clippy::too_many_arguments)]
fn fock_oracle(
    theta: f64,
    modes: Vec<(f64, f64, i8)>,
    tau: f64,
    m_a: Complex64,
    m_b: Complex64,
    b0_a: Option<Complex64>,
    b0_b: Option<Complex64>,
    tol: f64,
    n_cap: Option<usize>,
) -> PyResult<(Complex64, Complex64, usize)> {
    let modes: Vec<DiscreteMode> = modes
        .into_iter()
        .map(|(x, rho, s)| {
            let sigma = match s {
                1 => Direction::Plus,
                -1 => Direction::Minus,
                _ => return Err(PyValueError::new_err(format!("sigma must be ±1, got {s}"))),
            };
            Ok(DiscreteMode { x, rho, sigma })
        })
        .collect::<PyResult<_>>()?;
    let mut cfg = FockOracleConfig::new(modes.clone(), theta, tol).map_err(py_err)?;
    if let Some(cap) = n_cap {
        cfg.n_cap = cap;
    }
    let a = BranchProfile::new("a", PhaseSum::constant(m_a), PhaseSum::constant(b0_a.unwrap_or(m_a)));
    let b = BranchProfile::new("b", PhaseSum::constant(m_b), PhaseSum::constant(b0_b.unwrap_or(m_b)));
    let out = fock_oracle_eta(&a, &b, &cfg, tau).map_err(py_err)?;
    Ok((out.eta, eta_discrete(&a, &b, &modes, theta, tau), out.n_max))
}

#[pymodule]
pub fn coherent_dfs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBath>()?;
    m.add("DivergentError", m.py().get_type::<DivergentError>())?;
    m.add("UnconvergedError", m.py().get_type::<UnconvergedError>())?;
    m.add_function(wrap_pyfunction!(free_decay, m)?)?;
    m.add_function(wrap_pyfunction!(gamma0, m)?)?;
    m.add_function(wrap_pyfunction!(dfs_report, m)?)?;
    m.add_function(wrap_pyfunction!(pulse_trace, m)?)?;
    m.add_function(wrap_pyfunction!(readout_gammas, m)?)?;
    m.add_function(wrap_pyfunction!(readout_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fock_oracle, m)?)?;
    Ok(())
}
