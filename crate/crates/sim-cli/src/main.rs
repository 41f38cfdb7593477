use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use srb_adaptive::analysis::{build_certificate, check_decay, DecayReport, LyapunovCertificate};
use srb_adaptive::balance::BalanceGains;
use srb_adaptive::sim::config::{ConfigError, ScenarioConfig};
use srb_adaptive::sim::log::read_csv_file;
use srb_adaptive::sim::traces::decay_trace_from_log;
use srb_adaptive::sim::{run_scenario, ControllerKind, RunSummary, SimError, TRANSIENT};

const CONFIG_ERROR: u8 = 3;

#[cfg(test)]
mod tests;

#[derive(Parser)]
#[command(name = "sim", about = "Single-rigid-body quadruped scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV log.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one scenario under several controllers.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "mpc,adaptive-mpc")]
        controllers: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a scenario with one parameter replaced, e.g. `plant.load_mass`.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lyapunov certificate for a gain set, optionally checked against a log.
    CheckLyapunov {
        /// Gains as `kp`, `kd` and optional `q_l` arrays, or a scenario file.
        #[arg(long)]
        gains: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = TRANSIENT)]
        transient: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsFile {
    kp: [f64; 6],
    kd: [f64; 6],
    /// Diagonal of Q_L; identity when absent.
    q_l: Option<[f64; 12]>,
}

#[derive(Serialize)]
struct LyapunovReport {
    lambda: f64,
    residual: f64,
    p_norm: f64,
    decay: Option<DecayReport>,
}

fn fail(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    CONFIG_ERROR
}

fn sim_error(e: SimError) -> u8 {
    match e {
        SimError::Config(e) => fail(e),
        other => {
            eprintln!("error: {other}");
            1
        }
    }
}

fn table(rows: &[(String, RunSummary)]) {
    println!(
        "{:<22} {:<10} {:>8} {:>10} {:>10} {:>10} {:>9} {:>9} {:>8}",
        "run", "status", "t_end", "rms_dz", "steady_dz", "max_dz", "max_roll", "max_pitch", "theta"
    );
    for (label, s) in rows {
        let (status, t_end) = match s.status {
            srb_adaptive::sim::RunStatus::Completed => ("ok", s.ticks as f64 * 1e-3),
            srb_adaptive::sim::RunStatus::Fallen { t } => ("fallen", t),
            srb_adaptive::sim::RunStatus::SolverFailure { t } => ("solver", t),
        };
        println!(
            "{:<22} {:<10} {:>8.3} {:>10.5} {:>10.5} {:>10.5} {:>9.4} {:>9.4} {:>8.3}",
            label,
            status,
            t_end,
            s.rms_height_error,
            s.steady_height_error,
            s.max_height_error,
            s.max_abs_roll,
            s.max_abs_pitch,
            s.max_theta_inf
        );
    }
}

fn worst_code(rows: &[(String, RunSummary)]) -> u8 {
    rows.iter().map(|(_, s)| s.status.exit_code() as u8).max().unwrap_or(0)
}

fn write_summaries(out: &Path, rows: &[(String, RunSummary)]) -> std::io::Result<()> {
    let list: Vec<&RunSummary> = rows.iter().map(|(_, s)| s).collect();
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&list).expect("summary serializes"))
}

/// Replaces the value at a dotted path in the serialized scenario.
fn with_param(cfg: &ScenarioConfig, path: &str, raw: &str) -> Result<ScenarioConfig, String> {
    let mut root: toml::Value = toml::from_str(&cfg.to_toml_string()).map_err(|e| e.to_string())?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut slot = &mut root;
    for key in path.split('.') {
        slot = match slot {
            toml::Value::Table(t) => t.get_mut(key),
            toml::Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| format!("no parameter `{path}`"))?;
    }
    *slot = value;
    ScenarioConfig::from_toml_str(&toml::to_string(&root).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::load(path)
}

fn run(scenario: &Path, out: &Path) -> u8 {
    let cfg = match load(scenario) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match run_scenario(&cfg, Some(out)) {
        Ok(r) => {
            println!("{}", serde_json::to_string_pretty(&r.summary).expect("summary serializes"));
            r.summary.status.exit_code() as u8
        }
        Err(e) => sim_error(e),
    }
}

fn compare(scenario: &Path, controllers: &[String], out: &Path) -> u8 {
    let base = match load(scenario) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let mut kinds = Vec::new();
    for name in controllers {
        match ControllerKind::parse(name) {
            Some(k) => kinds.push(k),
            None => return fail(format!("unknown controller `{name}`")),
        }
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&k| {
                let cfg = ScenarioConfig { controller: k, ..base.clone() };
                s.spawn(move || run_scenario(&cfg, Some(out)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread")).collect()
    });
    let mut rows = Vec::new();
    for (k, r) in kinds.iter().zip(results) {
        match r {
            Ok(r) => rows.push((k.name().to_string(), r.summary)),
            Err(e) => return sim_error(e),
        }
    }
    table(&rows);
    if let Err(e) = write_summaries(out, &rows) {
        eprintln!("error: {e}");
        return 1;
    }
    worst_code(&rows)
}

fn sweep(scenario: &Path, param: &str, values: &[String], out: Option<&Path>) -> u8 {
    let base = match load(scenario) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let mut cfgs = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match with_param(&base, param, v.trim()) {
            Ok(mut c) => {
                c.name = format!("{}_{param}_{i}", base.name).replace('.', "-");
                cfgs.push((format!("{param}={}", v.trim()), c));
            }
            Err(e) => return fail(e),
        }
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = cfgs.iter().map(|(_, c)| s.spawn(move || run_scenario(c, out))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread")).collect()
    });
    let mut rows = Vec::new();
    for ((label, _), r) in cfgs.into_iter().zip(results) {
        match r {
            Ok(r) => rows.push((label, r.summary)),
            Err(e) => return sim_error(e),
        }
    }
    table(&rows);
    if let Some(out) = out {
        if let Err(e) = write_summaries(out, &rows) {
            eprintln!("error: {e}");
            return 1;
        }
    }
    worst_code(&rows)
}

fn read_gains(path: &Path) -> Result<(BalanceGains, [f64; 12]), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    match toml::from_str::<GainsFile>(&text) {
        Ok(g) => {
            let gains = BalanceGains { kp: g.kp.into(), kd: g.kd.into(), ..Default::default() };
            Ok((gains, g.q_l.unwrap_or([1.0; 12])))
        }
        Err(direct) => match ScenarioConfig::from_toml_str(&text) {
            Ok(cfg) => Ok((cfg.balance.to_gains(), [1.0; 12])),
            Err(_) => Err(direct.to_string()),
        },
    }
}

fn lyapunov_report(gains: &Path, log: Option<&Path>, transient: f64) -> Result<LyapunovReport, String> {
    let (g, q) = read_gains(gains)?;
    let q_l = nalgebra::SMatrix::<f64, 12, 12>::from_diagonal(&nalgebra::SVector::<f64, 12>::from(q));
    let cert: LyapunovCertificate = build_certificate(&g.kp, &g.kd, &q_l).map_err(|e| e.to_string())?;
    let decay = match log {
        None => None,
        Some(p) => {
            let records = read_csv_file(p).map_err(|e| e.to_string())?;
            let trace = decay_trace_from_log(&records, &g);
            Some(check_decay(&trace, &cert, None, transient).map_err(|e| e.to_string())?)
        }
    };
    Ok(LyapunovReport { lambda: cert.lambda, residual: cert.residual, p_norm: cert.p_norm(), decay })
}

fn check_lyapunov(gains: &Path, log: Option<&Path>, transient: f64, json: bool) -> u8 {
    let report = match lyapunov_report(gains, log, transient) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!("lambda    {:.6e}", report.lambda);
        println!("residual  {:.3e}", report.residual);
        println!("|P|       {:.6e}", report.p_norm);
        if let Some(d) = &report.decay {
            println!("eps_V     {:.6e}", d.epsilon_v);
            println!("violations {}/{} ({:.2}%)", d.violations, d.samples, 100.0 * d.violation_fraction);
            println!(
                "after {transient} s {}/{} ({:.2}%)",
                d.post_transient_violations,
                d.post_transient_samples,
                100.0 * d.post_transient_fraction
            );
        }
    }
    0
}

fn dispatch(cli: Cli) -> u8 {
    match cli.command {
        Command::Run { scenario, out } => run(&scenario, &out),
        Command::Compare { scenario, controllers, out } => compare(&scenario, &controllers, &out),
        Command::Sweep { scenario, param, values, out } => sweep(&scenario, &param, &values, out.as_deref()),
        Command::CheckLyapunov { gains, log, transient, json } => check_lyapunov(&gains, log.as_deref(), transient, json),
    }
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => ExitCode::from(dispatch(cli)),
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            ExitCode::from(code)
        }
    }
}
