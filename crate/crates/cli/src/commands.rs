//! The four subcommands. Each returns `Ok(())` for exit code 0 or a
//! [`CliError`] carrying the exit code.

use std::fs;
use std::path::{Path, PathBuf};

use pesim_core::experiments::{
    self, default_eps_ladder, simulate, ExperimentResult, ExperimentSpec,
};
use pesim_core::functionals::{m_infinity, steady_states, DiagnosticsRecord, Regime};
use pesim_core::inequalities::{run_suite, Suite, SuiteOptions};
use pesim_core::stepper::RunStats;
use pesim_core::State;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::output;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Coexistence,
    Extinction,
    EpsConvergence,
    AbsorbingSet,
    OdeConsistency,
    ChiSweep,
}

/// Bracket and bisection depth used by `--which chi-sweep`.
const CHI_SWEEP: (f64, f64, usize) = (0.01, 1.0, 5);

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn summary(cfg: &RunConfig, status: &str, stats: Option<&RunStats>, n_samples: usize, t_final: f64) -> Value {
    let ss = steady_states(&cfg.spec.kp);
    let config: Map<String, Value> = cfg.resolved().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect();
    json!({
        "status": status,
        "config": config,
        "u_star": ss.u_star,
        "v_star": ss.v_star,
        "regime": match ss.regime { Regime::Coexistence => "coexistence", Regime::Extinction => "extinction" },
        "m_infinity": m_infinity(&cfg.spec.kp, cfg.spec.grid.length()).ok(),
        "samples": n_samples,
        "t_final": t_final,
        "stats": stats,
    })
}

/// Writes timeseries, snapshots, summary and the resolved config.
fn write_run(
    cfg: &RunConfig,
    samples: &[State],
    records: &[DiagnosticsRecord],
    stats: Option<&RunStats>,
    status: &str,
) -> Result<(), CliError> {
    let dir = Path::new(&cfg.out_dir);
    output::write(&dir.join("timeseries.csv"), &output::timeseries_csv(records))?;
    output::write_snapshots(dir, samples)?;
    let t_final = samples.last().map_or(0.0, |s| s.t);
    output::write_json(&dir.join("summary.json"), &summary(cfg, status, stats, samples.len(), t_final))?;
    output::write(&dir.join("resolved.cfg"), &cfg.to_text())
}

/// Flushes what a failed run managed to record, then reports the failure.
fn flush_failure(cfg: &RunConfig, spec: &ExperimentSpec, err: pesim_core::Error) -> CliError {
    if let pesim_core::Error::Run(failure) = &err {
        let records: Vec<DiagnosticsRecord> = failure
            .samples
            .iter()
            .map_while(|s| pesim_core::functionals::diagnostics(s, &spec.kp, &spec.rp, spec.kind, spec.gamma).ok())
            .collect();
        if let Err(io) = write_run(cfg, &failure.samples[..records.len()], &records, None, "failed") {
            return io;
        }
    }
    err.into()
}

pub fn simulate_cmd(config_path: &Path) -> Result<(), CliError> {
    let cfg = load_config(config_path)?;
    match simulate(&cfg.spec) {
        Ok(sim) => write_run(&cfg, &sim.samples, &sim.records, Some(&sim.stats), "ok"),
        Err(e) => Err(flush_failure(&cfg, &cfg.spec, e)),
    }
}

fn verdict_failures(verdicts: &std::collections::BTreeMap<String, experiments::Verdict>) -> Result<(), CliError> {
    let failed: Vec<&str> = verdicts.iter().filter(|(_, v)| !v.pass).map(|(k, _)| k.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verdict(format!("failed verdicts: {}", failed.join(", "))))
    }
}

fn finish_study(cfg: &RunConfig, which: &str, result: Result<ExperimentResult, pesim_core::Error>) -> Result<(), CliError> {
    let result = result.map_err(|e| flush_failure(cfg, &cfg.spec, e))?;
    write_run(cfg, &result.samples, &result.records, None, "ok")?;
    let dir = Path::new(&cfg.out_dir);
    output::write_json(
        &dir.join("verdicts.json"),
        &json!({ "experiment": which, "passed": result.passed(), "verdicts": result.verdicts, "notes": result.notes }),
    )?;
    verdict_failures(&result.verdicts)
}

pub fn experiment_cmd(config_path: &Path, which: Which) -> Result<(), CliError> {
    let cfg = load_config(config_path)?;
    let spec = &cfg.spec;
    let dir = PathBuf::from(&cfg.out_dir);
    match which {
        Which::Coexistence => finish_study(&cfg, "coexistence", experiments::run_coexistence_study(spec)),
        Which::Extinction => finish_study(&cfg, "extinction", experiments::run_extinction_study(spec)),
        Which::AbsorbingSet => finish_study(&cfg, "absorbing-set", experiments::run_absorbing_set(spec)),
        Which::OdeConsistency => finish_study(&cfg, "ode-consistency", experiments::run_ode_consistency(spec)),
        Which::EpsConvergence => {
            let conv = experiments::run_eps_convergence(spec, &default_eps_ladder(spec.rp.eps))?;
            output::write(&dir.join("eps_convergence.csv"), &output::eps_csv(&conv))?;
            for (k, s) in conv.finals.iter().enumerate() {
                output::write(&dir.join(format!("snapshots/eps_{k}.csv")), &output::profile_csv(s))?;
            }
            output::write(&dir.join("resolved.cfg"), &cfg.to_text())?;
            output::write_json(
                &dir.join("verdicts.json"),
                &json!({
                    "experiment": "eps-convergence",
                    "passed": conv.passed(),
                    "verdicts": conv.verdicts,
                    "eps": conv.eps,
                    "distances_u": conv.distances_u,
                    "distances_v": conv.distances_v,
                }),
            )?;
            verdict_failures(&conv.verdicts)
        }
        Which::ChiSweep => {
            let (lo, hi, iters) = CHI_SWEEP;
            let sweep = experiments::run_chi_sweep(spec, lo, hi, iters)?;
            output::write(&dir.join("resolved.cfg"), &cfg.to_text())?;
            output::write_json(&dir.join("chi_sweep.json"), &sweep)?;
            output::write_json(
                &dir.join("verdicts.json"),
                &json!({ "experiment": "chi-sweep", "passed": true, "verdicts": {}, "chi_stable": sweep.chi_stable, "chi_unstable": sweep.chi_unstable }),
            )
        }
    }
}

pub fn verify_cmd(out_dir: &Path, suite: Suite, beta: Option<f64>, seed: u64) -> Result<(), CliError> {
    let opts = SuiteOptions { seed, beta, ..SuiteOptions::default() };
    let pool = experiments::worker_pool()?;
    let reports = pool.install(|| run_suite(suite, &opts))?;
    let mut failed = Vec::new();
    for r in &reports {
        output::write_json(&out_dir.join(format!("{}.json", r.name)), r)?;
        if !r.pass {
            failed.push(format!("{} (worst ratio {})", r.name, r.worst_ratio));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verdict(failed.join(", ")))
    }
}

pub fn plot_cmd(out_dir: &Path) -> Result<PathBuf, CliError> {
    let script = output::plot_script(out_dir)
        .ok_or_else(|| CliError::Config(format!("{}: no timeseries, snapshots or eps table to plot", out_dir.display())))?;
    let path = out_dir.join("plot.py");
    output::write(&path, &script)?;
    Ok(path)
}
