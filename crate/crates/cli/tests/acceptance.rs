//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs as a plain binary (`harness = false`).

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pesim_cli::commands::{self, Which};
use pesim_core::experiments::{self, simulate, ExperimentSpec, InitialCondition};
use pesim_core::functionals::{cross_term_productions, steady_states, weak_residual, CosineBump};
use pesim_core::inequalities::Suite;
use pesim_core::stepper::{run_until, Scheme, StepperConfig};
use pesim_core::{Field, Grid1D, KineticParams, ModelKind, RegParams, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn(&Path) -> Result<Outcome, String>;

fn read_json(p: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn verdict(v: &Value, key: &str) -> Result<(bool, f64), String> {
    let entry = &v["verdicts"][key];
    match (entry["pass"].as_bool(), entry["value"].as_f64()) {
        (Some(p), Some(x)) => Ok((p, x)),
        _ => Err(format!("verdict `{key}` missing")),
    }
}

/// Runs `pe-sim experiment` through the library entry point on a config
/// written to `dir`; a failed verdict is not an error here.
fn experiment(dir: &Path, body: &str, which: Which) -> Result<Value, String> {
    let out = dir.join("out");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, format!("{body}\nout.dir = {}\n", out.display())).map_err(|e| e.to_string())?;
    match commands::experiment_cmd(&cfg, which) {
        Ok(()) => {}
        Err(e) if e.exit_code() == 3 => {}
        Err(e) => return Err(e.to_string()),
    }
    read_json(&out.join("verdicts.json"))
}

fn steady_state_exactness(_: &Path) -> Result<Outcome, String> {
    let mut spec = ExperimentSpec::coexistence_default();
    let ss = steady_states(&spec.kp);
    spec.ic = InitialCondition::Constant { u: ss.u_star, v: ss.v_star };
    spec.t_end = 10.0;
    spec.sample_every = 10.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [ModelKind::Limit, ModelKind::Regularized] {
        spec.kind = kind;
        let sim = simulate(&spec).map_err(|e| e.to_string())?;
        let last = sim.final_state();
        let du = last.u.values().iter().fold(0.0f64, |m, x| m.max((x - ss.u_star).abs()));
        let dv = last.v.values().iter().fold(0.0f64, |m, x| m.max((x - ss.v_star).abs()));
        pass &= du <= 1e-8 && dv <= 1e-8 && last.t == 10.0;
        parts.push(format!("{kind:?}: |u-u*| = {du:.2e}, |v-v*| = {dv:.2e}"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn coexistence_body() -> String {
    // the config defaults are the coexistence setting
    "model.lambda1 = 1\nmodel.lambda2 = 2\nmodel.chi1 = 0.05\nmodel.chi2 = 0.05\nreg.eps = 1e-4\n\
     reg.alpha = 0.5\nreg.n1 = 2\nreg.n2 = 2\ngrid.n = 128\nic.kind = perturbed\nic.base_u = 1.5\n\
     ic.base_v = 0.5\nic.amp_u = 0.3\nic.amp_v = 0.3\nic.mode = 1\ntime.t_end = 100"
        .to_string()
}

fn coexistence(dir: &Path) -> Result<Outcome, String> {
    let v = experiment(dir, &coexistence_body(), Which::Coexistence)?;
    let (pu, du) = verdict(&v, "sup_u_error")?;
    let (pv, dv) = verdict(&v, "sup_v_error")?;
    Ok(Outcome { pass: pu && pv, detail: format!("|u(T)-1.5| = {du:.3e}, |v(T)-0.5| = {dv:.3e}") })
}

fn extinction(dir: &Path) -> Result<Outcome, String> {
    let body = "model.lambda1 = 2\nmodel.lambda2 = 1\nreg.n1 = 2\nreg.n2 = 1\ngrid.n = 128\n\
                ic.kind = perturbed\nic.base_u = 2\nic.base_v = 0.5\nic.amp_u = 0.3\nic.amp_v = 0.2\n\
                ic.mode_u = 1\nic.mode_v = 2\ntime.t_end = 150";
    let v = experiment(dir, body, Which::Extinction)?;
    let (pu, du) = verdict(&v, "sup_u_error")?;
    let (pv, dv) = verdict(&v, "sup_v")?;
    Ok(Outcome { pass: pu && pv, detail: format!("|v(T)| = {dv:.3e}, |u(T)-2| = {du:.3e}") })
}

fn absorbing_set(dir: &Path) -> Result<Outcome, String> {
    let body = "model.lambda1 = 1\nmodel.lambda2 = 1\ngrid.n = 128\nic.kind = constant\nic.base_u = 30\n\
                ic.base_v = 30\ntime.t_end = 50";
    let v = experiment(dir, body, Which::AbsorbingSet)?;
    let (pass, mass) = verdict(&v, "final_mass")?;
    let m_inf = v["notes"]["m_infinity"].as_f64().ok_or("m_infinity missing")?;
    Ok(Outcome {
        pass: pass && (m_inf - 5.9404).abs() < 1e-4,
        detail: format!("mass(T) = {mass:.4}, m_inf = {m_inf:.4}, ratio {:.4}", mass / m_inf),
    })
}

fn ode_consistency(dir: &Path) -> Result<Outcome, String> {
    let body = "model.kind = limit\nic.kind = constant\nic.base_u = 1\nic.base_v = 1\ngrid.n = 16\n\
                time.t_end = 10\nstepper.dt_max = 1e-4";
    let v = experiment(dir, body, Which::OdeConsistency)?;
    let (pass, dev) = verdict(&v, "final_deviation")?;
    let worst = v["notes"]["max_deviation_over_time"].as_f64().unwrap_or(f64::NAN);
    Ok(Outcome { pass, detail: format!("deviation at T = {dev:.3e} (max over run {worst:.3e})") })
}

fn cross_term_cancellation(_: &Path) -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.gen_range(16..=128);
        let grid = Grid1D::new(0.0, rng.gen_range(0.5..3.0), n).map_err(|e| e.to_string())?;
        let field = |rng: &mut ChaCha8Rng| {
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..4.0)).collect();
            Field::new(grid, vals)
        };
        let u = field(&mut rng).map_err(|e| e.to_string())?;
        let v = field(&mut rng).map_err(|e| e.to_string())?;
        let state = State::new(0.0, u, v).map_err(|e| e.to_string())?;
        let kp = KineticParams {
            chi1: rng.gen_range(0.01..1.0),
            chi2: rng.gen_range(0.01..1.0),
            ..KineticParams::default()
        };
        let n1 = rng.gen_range(0.0..3.5);
        let rp = RegParams { eps: 10f64.powf(rng.gen_range(-6.0..-1.0)), n1, n2: rng.gen_range(0.0..3.5), ..RegParams::default() };
        let kind = if k % 2 == 0 { ModelKind::Regularized } else { ModelKind::Limit };
        let (a, b) = cross_term_productions(&state, &kp, &rp, kind).map_err(|e| e.to_string())?;
        worst = worst.max((a + b).abs() / a.abs().max(b.abs()));
    }
    Ok(Outcome { pass: worst < 1e-12, detail: format!("worst relative mismatch {worst:.2e}") })
}

fn inequality_suite(dir: &Path) -> Result<Outcome, String> {
    let out = dir.join("checks");
    let status = commands::verify_cmd(&out, Suite::All, None, 0);
    let mut files = 0;
    let mut worst = Vec::new();
    let mut all_pass = true;
    for entry in fs::read_dir(&out).map_err(|e| e.to_string())? {
        let r = read_json(&entry.map_err(|e| e.to_string())?.path())?;
        files += 1;
        let pointwise = r["tolerance"].as_f64() == Some(0.0);
        let ratio = r["worst_ratio"].as_f64().unwrap_or(f64::NAN);
        let limit = if pointwise { 1.0 } else { 1.05 };
        all_pass &= r["pass"].as_bool() == Some(true) && ratio <= limit;
        worst.push(format!("{}={ratio:.4}", r["name"].as_str().unwrap_or("?")));
    }
    worst.sort();
    Ok(Outcome { pass: status.is_ok() && all_pass && files >= 5, detail: format!("{files} reports: {}", worst.join(" ")) })
}

fn eps_consistency(_: &Path) -> Result<Outcome, String> {
    let mut spec = ExperimentSpec::coexistence_default();
    spec.t_end = 1.0;
    spec.sample_every = 1.0;
    let conv = experiments::run_eps_convergence(&spec, &[1e-2, 2.5e-3, 6.25e-4]).map_err(|e| e.to_string())?;
    let d = &conv.distances_u;
    Ok(Outcome {
        pass: d.windows(2).all(|w| w[1] < w[0]),
        detail: format!("L2 distances of u: {:.3e} > {:.3e} (v: {:.3e}, {:.3e})", d[0], d[1], conv.distances_v[0], conv.distances_v[1]),
    })
}

fn entropy_tail(dir: &Path) -> Result<Outcome, String> {
    // reads the output of the coexistence criterion
    let v = read_json(&dir.join("../2/out/verdicts.json"))?;
    let (pass, slope) = verdict(&v, "e1_tail_slope")?;
    let allowance = 10.0 * 1e-4f64.sqrt();
    Ok(Outcome { pass: pass && slope <= allowance, detail: format!("tail slope of E1 = {slope:.3e} (allowance {allowance:.1e})") })
}

fn weak_residual_refinement(_: &Path) -> Result<Outcome, String> {
    let base = ExperimentSpec::coexistence_default();
    let kp = base.kp;
    let t_end = 0.5;
    let residual = |n: usize, dt: f64| -> Result<(f64, f64), String> {
        let g = Grid1D::unit(n).map_err(|e| e.to_string())?;
        let s = State::new(
            0.0,
            Field::from_fn(g, |x| 1.5 + 0.3 * (PI * x).cos()),
            Field::from_fn(g, |x| 0.5 + 0.2 * (PI * x).cos()),
        )
        .map_err(|e| e.to_string())?;
        let cfg = StepperConfig::fixed(dt, Scheme::Imex);
        let run = run_until(s, t_end, &kp, &base.rp, ModelKind::Limit, &cfg, dt, |_| {}).map_err(|e| e.to_string())?;
        weak_residual(&run.samples, &kp, &CosineBump::on(&g, 1, 0.0, t_end)).map_err(|e| e.to_string())
    };
    let coarse = residual(16, 1e-4)?;
    let fine = residual(32, 5e-5)?;
    let (fu, fv) = (coarse.0 / fine.0, coarse.1 / fine.1);
    Ok(Outcome {
        pass: fu >= 2.0 && fv >= 2.0,
        detail: format!("residual u {:.3e} -> {:.3e} (x{fu:.2}), v {:.3e} -> {:.3e} (x{fv:.2})", coarse.0, fine.0, coarse.1, fine.1),
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, Option<Duration>); 10] = [
        ("steady-state exactness", steady_state_exactness, Some(Duration::from_secs(10))),
        ("coexistence stabilization", coexistence, Some(Duration::from_secs(300))),
        ("extinction stabilization", extinction, Some(Duration::from_secs(480))),
        ("absorbing set", absorbing_set, Some(Duration::from_secs(180))),
        ("ODE consistency", ode_consistency, None),
        ("cross-term cancellation", cross_term_cancellation, None),
        ("inequality suite", inequality_suite, Some(Duration::from_secs(60))),
        ("eps-consistency", eps_consistency, None),
        ("entropy tail monitor", entropy_tail, None),
        ("weak residual refinement", weak_residual_refinement, None),
    ];
    let root = TempDir::new().expect("temp dir");
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let dir = root.path().join((i + 1).to_string());
        fs::create_dir_all(&dir).expect("criterion dir");
        let start = Instant::now();
        let outcome = check(&dir);
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(o) => {
                let in_time = budget.is_none_or(|b| elapsed <= b);
                let note = if in_time { String::new() } else { " [over time budget]".into() };
                (o.pass && in_time, format!("{}{note}", o.detail))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
