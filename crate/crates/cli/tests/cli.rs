use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coherent-dfs"))
}

fn finish(out: Output) -> Run {
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("run.ini");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, config: &str, extra: &[&str]) -> Run {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, config);
    finish(bin().arg(sub).arg("--config").arg(&path).args(extra).output().unwrap())
}

fn run_to_file(sub: &str, config: &str) -> (Run, TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, config);
    let out = dir.path().join("out.txt");
    let r = finish(bin().arg(sub).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap());
    (r, dir, out)
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn free_decay_config(lambda: f64, theta: f64, initial: &str) -> String {
    format!(
        "[bath]\nd = 1\nlambda = {lambda}\ntheta = {theta}\n[times]\nstop = 10\ncount = 41\n[free_decay]\ninitial = {initial}\n"
    )
}

#[test]
fn free_decay_matches_logarithmic_anchor() {
    let r = run("free-decay", &free_decay_config(0.25, 0.0, "unentangled"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (h, rows) = csv_rows(&r.stdout);
    assert_eq!(h, ["tau", "gamma", "phi", "dtheta", "eta_re", "eta_im", "eta_abs"]);
    let tau = column(&h, &rows, "tau");
    let gamma = column(&h, &rows, "gamma");
    assert_eq!(tau.len(), 41);
    for (t, g) in tau.iter().zip(&gamma) {
        assert!((g - 0.25 * (1.0 + t * t).ln()).abs() < 1e-6);
    }
}

#[test]
fn free_decay_zero_coupling_and_temperature_ordering() {
    let r = run("free-decay", &free_decay_config(0.0, 0.5, "unentangled"), &[]);
    let (h, rows) = csv_rows(&r.stdout);
    assert!(column(&h, &rows, "gamma").iter().all(|&g| g == 0.0));
    assert!(column(&h, &rows, "eta_abs").iter().all(|&e| e == 1.0));

    let cold = run("free-decay", &free_decay_config(0.25, 0.01, "unentangled"), &[]);
    let hot = run("free-decay", &free_decay_config(0.25, 1.0, "unentangled"), &[]);
    let (hc, rc) = csv_rows(&cold.stdout);
    let (hh, rh) = csv_rows(&hot.stdout);
    for (c, h) in column(&hc, &rc, "gamma").iter().zip(column(&hh, &rh, "gamma")) {
        assert!(h >= *c);
    }
}

#[test]
fn divergent_trace_exits_three_without_output() {
    let (r, _dir, out) = run_to_file("free-decay", &free_decay_config(0.25, 0.0, "stationary"));
    assert_eq!(r.code, 3);
    let record: Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert_eq!(record["error"], "divergent");
    assert!(!out.exists());
}

#[test]
fn gamma0_reports_closed_form_and_divergence() {
    let cfg = "[bath]\nd = 3\nlambda = 1\ntheta = 1\n[gamma0]\nlabels = up, down\n";
    let v: Value = serde_json::from_str(&run("gamma0", cfg, &[]).stdout).unwrap();
    assert!((v["gamma0"].as_f64().unwrap() - 2.289868).abs() < 1e-6);
    assert!((v["closed_form"].as_f64().unwrap() - 2.289868).abs() < 1e-6);
    assert!(v["difference"].as_f64().unwrap() <= 1e-6);

    let cfg = "[bath]\nd = 1\nlambda = 1\ntheta = 1\n[gamma0]\nlabels = up, down\n";
    let r = run("gamma0", cfg, &[]);
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["gamma0"], "divergent");
    assert!(v["difference"].is_null());
    let r = run("gamma0", &format!("{cfg}on_divergence = error\n"), &[]);
    assert_eq!(r.code, 3);

    let single = "[bath]\nd = 3\nlambda = 0.5\ntheta = 0.4\n[gamma0]\nlabels = up, down\n";
    let pair = "[bath]\nd = 3\nlambda = 0.5\ntheta = 0.4\n[gamma0]\nmodel = weak_collective\nn = 2\nlabels = 2, -2\n";
    let g =
        |cfg: &str| serde_json::from_str::<Value>(&run("gamma0", cfg, &[]).stdout).unwrap()["gamma0"].as_f64().unwrap();
    assert!((g(pair) / g(single) - 4.0).abs() < 1e-10);
}

const FIG1: &str =
    "[bath]\nd = 1\nlambda = 0.25\ntheta = 0.01, 1.0\n[bangbang]\ndt = 1.0\nn_cycles = 6\nper_interval = 8\n";

#[test]
fn bangbang_symmetrized_readouts_dominate() {
    let r = run("bangbang", FIG1, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (h, rows) = csv_rows(&r.stdout);
    assert_eq!(h, ["tau", "gamma", "eta_abs", "protocol", "dt", "theta", "d", "lambda"]);
    let readout = |protocol: &str, theta: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r[3] == protocol && r[5] == theta)
            .filter(|r| {
                let t: f64 = r[0].parse().unwrap();
                (t / 2.0 - (t / 2.0).round()).abs() < 1e-12
            })
            .map(|r| r[2].parse().unwrap())
            .collect()
    };
    for theta in ["0.01", "1.0"] {
        let (s, y) = (readout("standard", theta), readout("symmetrized", theta));
        assert_eq!(s.len(), 7);
        assert_eq!(s.len(), y.len());
        assert!(s.iter().zip(&y).all(|(a, b)| b >= a));
    }
}

#[test]
fn bangbang_zero_cycles_is_a_single_coherent_point() {
    let cfg = "[bath]\nd = 1\nlambda = 0.25\ntheta = 1\n[bangbang]\nprotocols = standard\nn_cycles = 0\n";
    let (h, rows) = csv_rows(&run("bangbang", cfg, &[]).stdout);
    assert_eq!(rows.len(), 1);
    assert_eq!(column(&h, &rows, "tau"), vec![0.0]);
    assert_eq!(column(&h, &rows, "eta_abs"), vec![1.0]);
}

#[test]
fn sweep_symmetrized_is_less_temperature_sensitive() {
    let cfg = "[bath]\nd = 1\nlambda = 0.25\ntheta = 0.01, 1.0\n[sweep]\ntotal_time = 20\nmax_cycles = 50\n";
    let r = run("sweep", cfg, &[]);
    let (h, rows) = csv_rows(&r.stdout);
    assert_eq!(h, ["freq_ratio", "n_cycles", "eta_strob", "eta_sym", "theta"]);
    assert_eq!(rows.len(), 100);
    let (cold, hot) = rows.split_at(50);
    let sens = |k: usize| {
        cold.iter()
            .zip(hot)
            .map(|(c, h)| (c[k].parse::<f64>().unwrap() - h[k].parse::<f64>().unwrap()).abs())
            .fold(0.0, f64::max)
    };
    assert!(sens(3) < sens(2));
    assert_eq!(cold[9][0], "1.0");
}

#[test]
fn dfs_report_has_the_documented_keys() {
    let cfg = "[bath]\nd = 1\nlambda = 0.25\ntheta = 0.5\n[dfs]\nmodel = individual_linear\nn = 2\nt_s = 0.5\nlabels = +-, -+\n";
    let v: Value = serde_json::from_str(&run("dfs-report", cfg, &[]).stdout).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["energy_shift_ok", "gamma0", "labels", "model", "overall_df", "phasing_ok"]);
    assert_eq!(v["overall_df"], true);

    let offsets = format!("{cfg}displacements = 0.3+0.1i, 0\n");
    let v: Value = serde_json::from_str(&run("dfs-report", &offsets, &[]).stdout).unwrap();
    assert_eq!(v["phasing_ok"], false);
    assert_eq!(v["overall_df"], false);

    let single = "[bath]\nd = 1\nlambda = 0.25\ntheta = 0.5\n[dfs]\nlabels = up, down\n";
    let v: Value = serde_json::from_str(&run("dfs-report", single, &[]).stdout).unwrap();
    assert_eq!(v["gamma0"], "divergent");
}

#[test]
fn oracle_agrees_and_reports_unconverged_truncation() {
    let cfg =
        "[oracle]\ntheta = 0.3\nx = 0.8, 1.7\nrho = 0.4, 0.2\nsigma = +, -\ntau = 2.5\nb0_a = 0.5+0.2i\nb0_b = 0\n";
    let r = run("oracle", cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["converged"], true);

    let r = run("oracle", &format!("{cfg}n_cap = 6\n"), &[]);
    assert_eq!(r.code, 4);
    let record: Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert_eq!(record["error"], "unconverged");
}

#[test]
fn config_errors_exit_two_and_write_nothing() {
    let bad = [
        format!("{}bogus = 1\n", free_decay_config(0.25, 0.0, "unentangled")),
        "[bath]\nd = 4\nlambda = 0.25\ntheta = 0\n[times]\nstop = 1\ncount = 2\n".to_string(),
        "[bath]\nd = 1\nlambda = 0.25\ntheta = 0, 1\n[times]\nstop = 1\ncount = 2\n".to_string(),
        "[bath]\nd = 1\nlambda = 0.25\n[times]\nstop = 1\ncount = 2\n".to_string(),
        "[bath]\nd = 1\nlambda = 0.25\ntheta = -1\n[times]\nstop = 1\ncount = 2\n".to_string(),
        "[bath]\nd = 1\nlambda = x\ntheta = 0\n[times]\nstop = 1\ncount = 2\n".to_string(),
        "[bath]\nd = 1\nlambda = 0.25\ntheta = 0\n[times]\nstop = 1\ncount = 2\n[extra]\nk = 1\n".to_string(),
    ];
    for cfg in &bad {
        let (r, _dir, out) = run_to_file("free-decay", cfg);
        assert_eq!(r.code, 2, "{cfg}\n{}", r.stderr);
        assert!(!out.exists());
        let record: Value = serde_json::from_str(r.stderr.trim()).unwrap();
        assert_eq!(record["error"], "config");
    }
    let r = run("gamma0", "[bath]\nd = 3\nlambda = 1\ntheta = 1\n[gamma0]\nlabels = up, sideways\n", &[]);
    assert_eq!(r.code, 2);
    let r = run("bangbang", "[bath]\nd = 1\nlambda = 1\ntheta = 1\n[bangbang]\nprotocols = free\n", &[]);
    assert_eq!(r.code, 2);
    let missing = finish(bin().args(["sweep", "--config", "/nonexistent/run.ini"]).output().unwrap());
    assert_eq!(missing.code, 2);
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn output_is_deterministic_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, FIG1);
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("trace{k}.csv"));
        let r = finish(
            bin()
                .arg("bangbang")
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .args(["--threads", threads])
                .output()
                .unwrap(),
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        outputs.push(read(&out));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}
