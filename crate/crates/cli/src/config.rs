//! Flat `key = value` run configuration.

use std::collections::BTreeMap;

use pesim_core::experiments::{ExperimentSpec, InitialCondition};
use pesim_core::grid::Grid1D;
use pesim_core::model::ModelKind;
use pesim_core::stepper::Scheme;

use crate::CliError;

/// Every accepted key, in the order used when echoing a resolved config.
pub const KEYS: &[&str] = &[
    "domain.left",
    "domain.right",
    "grid.n",
    "model.kind",
    "model.d1",
    "model.d2",
    "model.chi1",
    "model.chi2",
    "model.a1",
    "model.a2",
    "model.lambda1",
    "model.lambda2",
    "reg.eps",
    "reg.alpha",
    "reg.n1",
    "reg.n2",
    "ic.kind",
    "ic.base_u",
    "ic.base_v",
    "ic.amp_u",
    "ic.amp_v",
    "ic.mode",
    "ic.mode_u",
    "ic.mode_v",
    "ic.seed",
    "time.t_end",
    "time.sample_every",
    "stepper.scheme",
    "stepper.dt_init",
    "stepper.dt_min",
    "stepper.dt_max",
    "stepper.newton_tol",
    "stepper.positivity_floor",
    "diag.gamma",
    "out.dir",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    Constant,
    Perturbed,
    RandomTrig,
}

impl IcKind {
    fn as_str(self) -> &'static str {
        match self {
            IcKind::Constant => "constant",
            IcKind::Perturbed => "perturbed",
            IcKind::RandomTrig => "random-trig",
        }
    }
}

/// A fully resolved configuration: an experiment spec plus the output
/// directory. The initial-condition keys are kept flat so that they can be
/// echoed verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub ic_kind: IcKind,
    pub base_u: f64,
    pub base_v: f64,
    pub amp_u: f64,
    pub amp_v: f64,
    pub mode_u: u32,
    pub mode_v: u32,
    pub out_dir: String,
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, CliError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config(format!("{key}: expected a finite number, got `{raw}`")))
}

fn parse_u64(key: &str, raw: &str) -> Result<u64, CliError> {
    raw.parse::<u64>()
        .map_err(|_| CliError::Config(format!("{key}: expected a nonnegative integer, got `{raw}`")))
}

fn parse_u32(key: &str, raw: &str) -> Result<u32, CliError> {
    raw.parse::<u32>()
        .map_err(|_| CliError::Config(format!("{key}: expected a nonnegative integer, got `{raw}`")))
}

/// Splits the text into key/value pairs, rejecting unknown and repeated keys.
fn tokenize(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        if value.is_empty() {
            return Err(CliError::Config(format!("{key}: missing value")));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!("{key}: given more than once")));
        }
    }
    Ok(map)
}

impl RunConfig {
    /// Parses a config; `out.dir` is required, every other key defaults to
    /// the coexistence study.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let map = tokenize(text)?;
        let get = |k: &str| map.get(k).map(String::as_str);
        let mut spec = ExperimentSpec::coexistence_default();
        let mut cfg = RunConfig::from_spec(spec.clone(), String::new());

        let out_dir = get("out.dir").ok_or_else(|| CliError::Config("out.dir: required key missing".into()))?;
        cfg.out_dir = out_dir.to_string();

        let f = |k: &str, current: f64| -> Result<f64, CliError> {
            match get(k) {
                Some(raw) => parse_f64(k, raw),
                None => Ok(current),
            }
        };
        let left = f("domain.left", spec.grid.x_left())?;
        let right = f("domain.right", spec.grid.x_right())?;
        let n = match get("grid.n") {
            Some(raw) => parse_u64("grid.n", raw)? as usize,
            None => spec.grid.n_cells(),
        };
        spec.grid = Grid1D::new(left, right, n).map_err(|e| CliError::Config(format!("grid.n / domain: {e}")))?;

        if let Some(raw) = get("model.kind") {
            spec.kind = raw.parse::<ModelKind>().map_err(|e| CliError::Config(format!("model.kind: {e}")))?;
        }
        let kp = &mut spec.kp;
        kp.d1 = f("model.d1", kp.d1)?;
        kp.d2 = f("model.d2", kp.d2)?;
        kp.chi1 = f("model.chi1", kp.chi1)?;
        kp.chi2 = f("model.chi2", kp.chi2)?;
        kp.a1 = f("model.a1", kp.a1)?;
        kp.a2 = f("model.a2", kp.a2)?;
        kp.lambda1 = f("model.lambda1", kp.lambda1)?;
        kp.lambda2 = f("model.lambda2", kp.lambda2)?;
        let rp = &mut spec.rp;
        rp.eps = f("reg.eps", rp.eps)?;
        rp.alpha = f("reg.alpha", rp.alpha)?;
        rp.n1 = f("reg.n1", rp.n1)?;
        rp.n2 = f("reg.n2", rp.n2)?;

        // without explicit data the perturbation is centered at the steady state
        let ss = pesim_core::functionals::steady_states(&spec.kp);
        let (default_u, default_v) = if ss.v_star > 0.0 { (ss.u_star, ss.v_star) } else { (ss.u_star, 0.5) };
        cfg.ic_kind = match get("ic.kind") {
            None | Some("perturbed") => IcKind::Perturbed,
            Some("constant") => IcKind::Constant,
            Some("random-trig") => IcKind::RandomTrig,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "ic.kind: expected constant, perturbed or random-trig, got `{other}`"
                )))
            }
        };
        cfg.base_u = f("ic.base_u", default_u)?;
        cfg.base_v = f("ic.base_v", default_v)?;
        let default_amp = if cfg.ic_kind == IcKind::Constant { 0.0 } else { 0.3 };
        cfg.amp_u = f("ic.amp_u", default_amp)?;
        cfg.amp_v = f("ic.amp_v", default_amp)?;
        let mode = match get("ic.mode") {
            Some(raw) => parse_u32("ic.mode", raw)?,
            None => 1,
        };
        cfg.mode_u = get("ic.mode_u").map(|r| parse_u32("ic.mode_u", r)).transpose()?.unwrap_or(mode);
        cfg.mode_v = get("ic.mode_v").map(|r| parse_u32("ic.mode_v", r)).transpose()?.unwrap_or(mode);
        spec.seed = get("ic.seed").map(|r| parse_u64("ic.seed", r)).transpose()?.unwrap_or(0);

        spec.t_end = f("time.t_end", spec.t_end)?;
        spec.sample_every = f("time.sample_every", spec.sample_every)?;
        if let Some(raw) = get("stepper.scheme") {
            spec.stepper.scheme = raw.parse::<Scheme>().map_err(|e| CliError::Config(format!("stepper.scheme: {e}")))?;
        }
        let st = &mut spec.stepper;
        st.dt_init = f("stepper.dt_init", st.dt_init)?;
        st.dt_min = f("stepper.dt_min", st.dt_min)?;
        st.dt_max = f("stepper.dt_max", st.dt_max)?;
        // an explicit bracket narrower than the default start clamps it
        if get("stepper.dt_init").is_none() {
            st.dt_init = st.dt_init.clamp(st.dt_min.min(st.dt_max), st.dt_max);
        }
        st.newton_tol = f("stepper.newton_tol", st.newton_tol)?;
        st.positivity_floor = f("stepper.positivity_floor", st.positivity_floor)?;
        spec.gamma = f("diag.gamma", spec.gamma)?;
        spec.name = "run".into();

        cfg.spec = spec;
        cfg.sync_ic();
        cfg.spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Wraps a spec whose initial condition is one of the flat variants.
    pub fn from_spec(spec: ExperimentSpec, out_dir: String) -> Self {
        let (ic_kind, base_u, base_v, amp_u, amp_v, mode_u, mode_v) = match spec.ic {
            InitialCondition::Constant { u, v } => (IcKind::Constant, u, v, 0.0, 0.0, 1, 1),
            InitialCondition::Perturbed { base_u, base_v, amp_u, amp_v, mode_u, mode_v } => {
                (IcKind::Perturbed, base_u, base_v, amp_u, amp_v, mode_u, mode_v)
            }
            InitialCondition::RandomTrig { base_u, base_v, amp_u, amp_v, modes, .. } => {
                (IcKind::RandomTrig, base_u, base_v, amp_u, amp_v, modes, modes)
            }
        };
        RunConfig { spec, ic_kind, base_u, base_v, amp_u, amp_v, mode_u, mode_v, out_dir }
    }

    fn sync_ic(&mut self) {
        self.spec.ic = match self.ic_kind {
            IcKind::Constant => InitialCondition::Constant { u: self.base_u, v: self.base_v },
            IcKind::Perturbed => InitialCondition::Perturbed {
                base_u: self.base_u,
                base_v: self.base_v,
                amp_u: self.amp_u,
                amp_v: self.amp_v,
                mode_u: self.mode_u,
                mode_v: self.mode_v,
            },
            IcKind::RandomTrig => InitialCondition::RandomTrig {
                base_u: self.base_u,
                base_v: self.base_v,
                amp_u: self.amp_u,
                amp_v: self.amp_v,
                modes: self.mode_u,
                seed: self.spec.seed,
            },
        };
    }

    /// Every key with its resolved value, in [`KEYS`] order.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let s = &self.spec;
        let num = |x: f64| format!("{x:?}");
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "domain.left" => num(s.grid.x_left()),
                    "domain.right" => num(s.grid.x_right()),
                    "grid.n" => s.grid.n_cells().to_string(),
                    "model.kind" => match s.kind {
                        ModelKind::Limit => "limit".into(),
                        ModelKind::Regularized => "regularized".into(),
                    },
                    "model.d1" => num(s.kp.d1),
                    "model.d2" => num(s.kp.d2),
                    "model.chi1" => num(s.kp.chi1),
                    "model.chi2" => num(s.kp.chi2),
                    "model.a1" => num(s.kp.a1),
                    "model.a2" => num(s.kp.a2),
                    "model.lambda1" => num(s.kp.lambda1),
                    "model.lambda2" => num(s.kp.lambda2),
                    "reg.eps" => num(s.rp.eps),
                    "reg.alpha" => num(s.rp.alpha),
                    "reg.n1" => num(s.rp.n1),
                    "reg.n2" => num(s.rp.n2),
                    "ic.kind" => self.ic_kind.as_str().into(),
                    "ic.base_u" => num(self.base_u),
                    "ic.base_v" => num(self.base_v),
                    "ic.amp_u" => num(self.amp_u),
                    "ic.amp_v" => num(self.amp_v),
                    "ic.mode" => self.mode_u.to_string(),
                    "ic.mode_u" => self.mode_u.to_string(),
                    "ic.mode_v" => self.mode_v.to_string(),
                    "ic.seed" => s.seed.to_string(),
                    "time.t_end" => num(s.t_end),
                    "time.sample_every" => num(s.sample_every),
                    "stepper.scheme" => match s.stepper.scheme {
                        Scheme::Imex => "imex".into(),
                        Scheme::FullyImplicit => "fully_implicit".into(),
                    },
                    "stepper.dt_init" => num(s.stepper.dt_init),
                    "stepper.dt_min" => num(s.stepper.dt_min),
                    "stepper.dt_max" => num(s.stepper.dt_max),
                    "stepper.newton_tol" => num(s.stepper.newton_tol),
                    "stepper.positivity_floor" => num(s.stepper.positivity_floor),
                    "diag.gamma" => num(s.gamma),
                    "out.dir" => self.out_dir.clone(),
                    _ => unreachable!("every key is listed"),
                };
                (k, v)
            })
            .collect()
    }

    /// The resolved config in the input format.
    pub fn to_text(&self) -> String {
        self.resolved().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
