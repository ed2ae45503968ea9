//! One function per subcommand. Each reads and checks its whole configuration
//! (including unknown-key rejection) before computing anything, and returns
//! the complete output text.

use coherent_dfs::coherent::COHERENCE_TRACE_COLUMNS;
use coherent_dfs::dfs::{branch_profiles, full_df_report, gamma0_pair, RegisterModel, DEFAULT_CONDITION_TOL};
use coherent_dfs::fock::{eta_discrete, fock_oracle_eta, DiscreteMode, FockOracleConfig, DEFAULT_ORACLE_TOL};
use coherent_dfs::pulse::{
    pulse_grid, pulse_trace, readout_sweep, trace_times, Protocol, PulseSchedule, PULSE_TRACE_COLUMNS, SWEEP_COLUMNS,
};
use coherent_dfs::special::gamma0_closed_form;
use coherent_dfs::{
    BathSpec, BranchProfile, CoherenceTrace, Direction, FrequencyGrid, GridOptions, Integral, PhaseSum,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::CliError;

/// Shortest representation that reads back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

struct BathConfig {
    d: u8,
    lambda: f64,
    thetas: Vec<f64>,
}

impl BathConfig {
    fn read(cfg: &Config) -> Result<Self, CliError> {
        let d = cfg.req("bath", "d")?;
        let lambda = cfg.req("bath", "lambda")?;
        let thetas: Vec<f64> =
            cfg.list("bath", "theta")?.ok_or_else(|| CliError::Config("missing required key `bath.theta`".into()))?;
        if thetas.is_empty() {
            return Err(CliError::Config("`bath.theta` is empty".into()));
        }
        let out = Self { d, lambda, thetas };
        for &t in &out.thetas {
            out.spec(t)?;
        }
        Ok(out)
    }

    fn spec(&self, theta: f64) -> Result<BathSpec, CliError> {
        BathSpec::new(self.d, self.lambda, theta).map_err(CliError::invalid)
    }

    fn single(&self) -> Result<BathSpec, CliError> {
        match self.thetas.as_slice() {
            [t] => self.spec(*t),
            _ => Err(CliError::Config("this subcommand takes a single `bath.theta`".into())),
        }
    }
}

fn grid_options(cfg: &Config) -> Result<GridOptions, CliError> {
    let nodes = cfg.or("grid", "nodes", GridOptions::default().nodes)?;
    let x_max: Option<f64> = cfg.opt("grid", "x_max")?;
    if nodes == 0 {
        return Err(CliError::Config("`grid.nodes` must be ≥ 1".into()));
    }
    if let Some(x) = x_max {
        if !(x > 0.0) || !x.is_finite() {
            return Err(CliError::Config(format!("`grid.x_max` must be > 0, got {x}")));
        }
    }
    Ok(GridOptions { nodes, x_max, ..GridOptions::default() })
}

fn build_grid(bath: &BathSpec, options: GridOptions) -> Result<FrequencyGrid, CliError> {
    FrequencyGrid::for_bath(bath, &options).map_err(CliError::invalid)
}

fn read_model(cfg: &Config, section: &str) -> Result<RegisterModel, CliError> {
    let name: String = cfg.or(section, "model", "single_qubit".to_string())?;
    let epsilon = cfg.or(section, "epsilon", 1.0)?;
    let model = match name.as_str() {
        "single_qubit" => RegisterModel::SingleQubit { epsilon },
        "weak_collective" => RegisterModel::WeakCollective { n: cfg.req(section, "n")?, epsilon },
        "individual_linear" => {
            RegisterModel::IndividualLinear { n: cfg.req(section, "n")?, t_s: cfg.req(section, "t_s")?, epsilon }
        }
        other => return Err(CliError::Config(format!("unknown model `{other}`"))),
    };
    model.validate().map_err(CliError::invalid)?;
    Ok(model)
}

/// Largest phase rate of a model's couplings, for grid resolution.
fn coupling_rate(model: &RegisterModel) -> f64 {
    match *model {
        RegisterModel::IndividualLinear { n, t_s, .. } => n as f64 * t_s,
        _ => 0.0,
    }
}

fn read_labels(cfg: &Config, section: &str) -> Result<Vec<String>, CliError> {
    let labels: Vec<String> = cfg
        .list(section, "labels")?
        .ok_or_else(|| CliError::Config(format!("missing required key `{section}.labels`")))?;
    if labels.is_empty() {
        return Err(CliError::Config(format!("`{section}.labels` is empty")));
    }
    Ok(labels)
}

pub fn free_decay(cfg: &Config) -> Result<String, CliError> {
    let bath = BathConfig::read(cfg)?.single()?;
    let options = grid_options(cfg)?;
    let start = cfg.or("times", "start", 0.0)?;
    let stop: f64 = cfg.req("times", "stop")?;
    let count: usize = cfg.req("times", "count")?;
    let initial: String = cfg.or("free_decay", "initial", "unentangled".to_string())?;
    cfg.finish()?;
    if !(start >= 0.0) || !(stop >= start) || !stop.is_finite() {
        return Err(CliError::Config(format!("need 0 ≤ times.start ≤ times.stop, got {start}, {stop}")));
    }
    if count == 0 {
        return Err(CliError::Config("`times.count` must be ≥ 1".into()));
    }
    let stationary = match initial.as_str() {
        "unentangled" => false,
        "stationary" => true,
        other => return Err(CliError::Config(format!("unknown initial state `{other}`"))),
    };
    let grid = build_grid(&bath, options.with_max_rate(stop))?;
    let times: Vec<f64> = if count == 1 {
        vec![start]
    } else {
        (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect()
    };

    let up = BranchProfile::single_qubit(true, stationary);
    let down = BranchProfile::single_qubit(false, stationary);
    let trace = CoherenceTrace::compute(&up, &down, &times, &bath, &grid)?;
    if trace.gamma.iter().any(|g| g.is_infinite()) {
        return Err(CliError::Divergent(format!(
            "dissipative factor diverges for d={} θ={} ({initial} start)",
            bath.d(),
            bath.theta()
        )));
    }
    let rows: Vec<Vec<String>> = trace.rows().map(|r| r.iter().map(|&v| num(v)).collect()).collect();
    csv_text(&COHERENCE_TRACE_COLUMNS, &rows)
}

pub fn gamma0(cfg: &Config) -> Result<String, CliError> {
    let bath = BathConfig::read(cfg)?.single()?;
    let options = grid_options(cfg)?;
    let model = read_model(cfg, "gamma0")?;
    let labels = read_labels(cfg, "gamma0")?;
    let on_divergence: String = cfg.or("gamma0", "on_divergence", "flag".to_string())?;
    cfg.finish()?;
    if labels.len() != 2 {
        return Err(CliError::Config(format!("`gamma0.labels` needs exactly two labels, got {}", labels.len())));
    }
    let as_error = match on_divergence.as_str() {
        "flag" => false,
        "error" => true,
        other => return Err(CliError::Config(format!("`gamma0.on_divergence` must be flag or error, got `{other}`"))),
    };
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let p = branch_profiles(&model, &refs).map_err(CliError::invalid)?;
    let grid = build_grid(&bath, options.with_max_rate(coupling_rate(&model)))?;

    let value = gamma0_pair(&p[0], &p[1], &bath, &grid);
    // closed form exists for constant couplings in three dimensions
    let closed = match model {
        RegisterModel::SingleQubit { .. } | RegisterModel::WeakCollective { .. } if bath.d() == 3 => {
            let dm = p[0].m.eval(0.0, Direction::Plus).re - p[1].m.eval(0.0, Direction::Plus).re;
            Some(0.25 * dm * dm * gamma0_closed_form(bath.theta(), bath.lambda())?)
        }
        _ => None,
    };
    let (numeric, difference) = match value {
        Integral::Finite(v) => (json!(v), closed.map_or(Value::Null, |c| json!((v - c).abs()))),
        Integral::Divergent { exponent } => {
            if as_error {
                return Err(CliError::Divergent(format!("Γ⁰ diverges (low-frequency exponent {exponent})")));
            }
            (json!("divergent"), Value::Null)
        }
    };
    Ok(json_text(&json!({
        "model": model.name(),
        "labels": p.iter().map(|b| b.label.clone()).collect::<Vec<_>>(),
        "d": bath.d(),
        "lambda": bath.lambda(),
        "theta": bath.theta(),
        "gamma0": numeric,
        "closed_form": closed,
        "difference": difference,
    })))
}

pub fn bangbang(cfg: &Config) -> Result<String, CliError> {
    let bath_cfg = BathConfig::read(cfg)?;
    let options = grid_options(cfg)?;
    let names: Vec<String> =
        cfg.list("bangbang", "protocols")?.unwrap_or_else(|| vec!["standard".into(), "symmetrized".into()]);
    let dt = cfg.or("bangbang", "dt", 1.0)?;
    let n_cycles = cfg.or("bangbang", "n_cycles", 10usize)?;
    let per_interval = cfg.or("bangbang", "per_interval", 20usize)?;
    cfg.finish()?;
    if per_interval == 0 {
        return Err(CliError::Config("`bangbang.per_interval` must be ≥ 1".into()));
    }
    let mut schedules = Vec::new();
    for name in &names {
        let protocol = Protocol::parse(name).map_err(CliError::invalid)?;
        if protocol == Protocol::Free {
            return Err(CliError::Config("bangbang needs a pulsed protocol; use free-decay for free evolution".into()));
        }
        schedules.push(PulseSchedule::new(protocol, dt, n_cycles).map_err(CliError::invalid)?);
    }
    let mut jobs = Vec::new();
    for &theta in &bath_cfg.thetas {
        let bath = bath_cfg.spec(theta)?;
        for s in &schedules {
            let grid = pulse_grid(&bath, s, 2.0 * n_cycles as f64 * dt, options.nodes).map_err(CliError::invalid)?;
            jobs.push((bath, *s, grid));
        }
    }

    let blocks: Vec<Vec<Vec<String>>> = jobs
        .par_iter()
        .map(|(bath, s, grid)| {
            let trace = pulse_trace(s, &trace_times(s, per_interval), bath, grid)?;
            Ok(trace
                .iter()
                .map(|p| {
                    vec![
                        num(p.tau),
                        num(p.gamma),
                        num(p.eta_abs),
                        s.protocol().name().to_string(),
                        num(dt),
                        num(bath.theta()),
                        bath.d().to_string(),
                        num(bath.lambda()),
                    ]
                })
                .collect())
        })
        .collect::<Result<_, CliError>>()?;
    csv_text(&PULSE_TRACE_COLUMNS, &blocks.concat())
}

pub fn sweep(cfg: &Config) -> Result<String, CliError> {
    let bath_cfg = BathConfig::read(cfg)?;
    let options = grid_options(cfg)?;
    let total_time: f64 = cfg.or("sweep", "total_time", 20.0)?;
    let max_cycles = cfg.or("sweep", "max_cycles", 50usize)?;
    cfg.finish()?;
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(CliError::Config(format!("`sweep.total_time` must be > 0, got {total_time}")));
    }
    let baths: Vec<BathSpec> = bath_cfg.thetas.iter().map(|&t| bath_cfg.spec(t)).collect::<Result<_, _>>()?;

    let blocks: Vec<Vec<Vec<String>>> = baths
        .par_iter()
        .map(|bath| {
            let points = readout_sweep(total_time, max_cycles, bath, options.nodes)?;
            Ok(points
                .iter()
                .map(|p| {
                    vec![num(p.freq_ratio), p.n_cycles.to_string(), num(p.eta_strob), num(p.eta_sym), num(p.theta)]
                })
                .collect())
        })
        .collect::<Result<_, CliError>>()?;
    csv_text(&SWEEP_COLUMNS, &blocks.concat())
}

pub fn dfs_report(cfg: &Config) -> Result<String, CliError> {
    let bath = BathConfig::read(cfg)?.single()?;
    let options = grid_options(cfg)?;
    let model = read_model(cfg, "dfs")?;
    let labels = read_labels(cfg, "dfs")?;
    let offsets = cfg.complex_list("dfs", "displacements")?;
    let tol = cfg.or("dfs", "tol", DEFAULT_CONDITION_TOL)?;
    cfg.finish()?;
    if !(tol > 0.0) {
        return Err(CliError::Config("`dfs.tol` must be > 0".into()));
    }
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let offsets: Option<Vec<PhaseSum>> = offsets.map(|v| v.into_iter().map(PhaseSum::constant).collect());
    if let Some(o) = &offsets {
        if o.len() != labels.len() {
            return Err(CliError::Config(format!("{} displacements for {} labels", o.len(), labels.len())));
        }
    }
    branch_profiles(&model, &refs).map_err(CliError::invalid)?;
    let grid = build_grid(&bath, options.with_max_rate(coupling_rate(&model)))?;

    let report = full_df_report(&model, &refs, offsets.as_deref(), &bath, &grid, tol)?;
    Ok(json_text(&report.to_json()))
}

pub fn oracle(cfg: &Config) -> Result<String, CliError> {
    let s = "oracle";
    let theta = cfg.req(s, "theta")?;
    let xs: Vec<f64> = cfg.list(s, "x")?.ok_or_else(|| CliError::Config("missing required key `oracle.x`".into()))?;
    let rhos: Vec<f64> =
        cfg.list(s, "rho")?.ok_or_else(|| CliError::Config("missing required key `oracle.rho`".into()))?;
    let sigmas: Option<Vec<String>> = cfg.list(s, "sigma")?;
    let tau: f64 = cfg.req(s, "tau")?;
    let tol = cfg.or(s, "tol", DEFAULT_ORACLE_TOL)?;
    let n_max: Option<usize> = cfg.opt(s, "n_max")?;
    let n_cap: Option<usize> = cfg.opt(s, "n_cap")?;
    let m_a = cfg.complex(s, "m_a", Complex64::new(1.0, 0.0))?;
    let m_b = cfg.complex(s, "m_b", Complex64::new(-1.0, 0.0))?;
    let b0_a = cfg.complex(s, "b0_a", m_a)?;
    let b0_b = cfg.complex(s, "b0_b", m_b)?;
    cfg.finish()?;

    if xs.len() != rhos.len() {
        return Err(CliError::Config(format!("{} mode frequencies for {} weights", xs.len(), rhos.len())));
    }
    let sigmas: Vec<Direction> = match sigmas {
        None => vec![Direction::Plus; xs.len()],
        Some(v) if v.len() == xs.len() => v
            .iter()
            .map(|t| match t.as_str() {
                "+" | "+1" => Ok(Direction::Plus),
                "-" | "-1" => Ok(Direction::Minus),
                other => Err(CliError::Config(format!("invalid direction `{other}`"))),
            })
            .collect::<Result<_, _>>()?,
        Some(v) => return Err(CliError::Config(format!("{} directions for {} modes", v.len(), xs.len()))),
    };
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(CliError::Config(format!("`oracle.tau` must be ≥ 0, got {tau}")));
    }
    let modes: Vec<DiscreteMode> =
        xs.iter().zip(&rhos).zip(&sigmas).map(|((&x, &rho), &sigma)| DiscreteMode { x, rho, sigma }).collect();
    let mut oc = FockOracleConfig::new(modes.clone(), theta, tol).map_err(CliError::invalid)?;
    if let Some(n) = n_max {
        oc = oc.with_n_max(n).map_err(CliError::invalid)?;
    }
    if let Some(cap) = n_cap {
        oc.n_cap = cap;
    }
    let a = BranchProfile::new("a", PhaseSum::constant(m_a), PhaseSum::constant(b0_a));
    let b = BranchProfile::new("b", PhaseSum::constant(m_b), PhaseSum::constant(b0_b));

    let out = fock_oracle_eta(&a, &b, &oc, tau)?;
    let analytic = eta_discrete(&a, &b, &modes, theta, tau);
    Ok(json_text(&json!({
        "eta_oracle": { "re": out.eta.re, "im": out.eta.im },
        "eta_analytic": { "re": analytic.re, "im": analytic.im },
        "abs_diff": (out.eta - analytic).norm(),
        "n_max": out.n_max,
        "delta": out.delta,
        "converged": true,
    })))
}
