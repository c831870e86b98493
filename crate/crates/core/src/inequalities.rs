//! Numerical checks of the auxiliary inequalities used in the analysis:
//! a thin-film interpolation inequality, two lower-bound interpolation
//! lemmas, pointwise bounds on the mollifier and the taxis coefficient, two
//! elementary logarithm bounds and an ODE comparison principle.
//!
//! Every checker reports LHS/RHS; quadrature-based checks tolerate a small
//! discretization excess, pointwise ones none.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{diff1, diff2, integrate, Field, Grid1D};
use crate::model::{h_flux, h_flux_prime, h_flux_second};

/// Pointwise inequalities are evaluated in forms that stay within the
/// bound after rounding, so no allowance is granted.
pub const POINTWISE_TOLERANCE: f64 = 0.0;
/// Discretization allowance for quadrature checks at N = 400.
pub const QUADRATURE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub worst_ratio: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub worst_case_payload: Value,
}

impl CheckReport {
    fn from_samples(name: &str, tolerance: f64, results: Vec<(f64, Value)>) -> Self {
        let samples = results.len();
        let (worst_ratio, worst_case_payload) = results
            .into_iter()
            .fold((f64::NEG_INFINITY, Value::Null), |acc, (r, p)| {
                // NaN ratios count as worst
                if r.is_nan() || (!acc.0.is_nan() && r > acc.0) {
                    (r, p)
                } else {
                    acc
                }
            });
        Self {
            name: name.to_string(),
            samples,
            pass: worst_ratio <= 1.0 + tolerance,
            worst_ratio,
            tolerance,
            worst_case_payload,
        }
    }
}

fn require_positive(f: &Field, func: &'static str) -> Result<()> {
    let m = f.min();
    if m > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { func, value: m })
    }
}

/// `∫φ^{β−2}φ_x⁴ ≤ 9/(β−1)² ∫φ^β φ_xx²`; a constant field reports 0.
pub fn check_bernis(f: &Field, beta: f64) -> Result<f64> {
    if beta == 1.0 || !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must differ from 1",
        });
    }
    require_positive(f, "check_bernis")?;
    let fx = diff1(f);
    let fxx = diff2(f);
    let dx = f.grid().dx();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for ((&s, &sx), &sxx) in f.values().iter().zip(fx.values()).zip(fxx.values()) {
        lhs += s.powf(beta - 2.0) * sx.powi(4);
        rhs += s.powf(beta) * sxx * sxx;
    }
    lhs *= dx;
    rhs *= dx * 9.0 / ((beta - 1.0) * (beta - 1.0));
    Ok(if lhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// `∫φ^{−p} ≤ q^{2p/q}|Ω|^{(p+q)/q}(∫φ^{−q−2}φ_x²)^{p/q} + 2^{2p/q}|Ω|^{p+1}(∫φ)^{−p}`.
pub fn check_interp_lower(f: &Field, p: f64, q: f64) -> Result<f64> {
    for (name, value) in [("p", p), ("q", q)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                value,
                reason: "must be positive",
            });
        }
    }
    require_positive(f, "check_interp_lower")?;
    let fx = diff1(f);
    let dx = f.grid().dx();
    let len = f.grid().length();
    let lhs = dx * f.values().iter().map(|s| s.powf(-p)).sum::<f64>();
    let grad = dx
        * f.values()
            .iter()
            .zip(fx.values())
            .map(|(&s, &sx)| s.powf(-q - 2.0) * sx * sx)
            .sum::<f64>();
    let rhs = q.powf(2.0 * p / q) * len.powf((p + q) / q) * grad.powf(p / q)
        + 2f64.powf(2.0 * p / q) * len.powf(p + 1.0) * integrate(f).powf(-p);
    Ok(lhs / rhs)
}

/// Logarithmic lower bound, rearranged into nonnegative sides:
/// `|Ω| ln(⨍φ) − ∫ln φ ≤ |Ω|^{3/2}(∫φ_x²/φ²)^{1/2}`.
///
/// Both sides vanish for constant fields, which are the equality case and
/// report 1.
pub fn check_interp_log(f: &Field) -> Result<f64> {
    require_positive(f, "check_interp_log")?;
    let fx = diff1(f);
    let dx = f.grid().dx();
    let len = f.grid().length();
    let grad = dx
        * f.values()
            .iter()
            .zip(fx.values())
            .map(|(&s, &sx)| sx * sx / (s * s))
            .sum::<f64>();
    if grad == 0.0 {
        return Ok(1.0);
    }
    let mean_log = dx * f.values().iter().map(|s| s.ln()).sum::<f64>();
    let lhs = len * (integrate(f) / len).ln() - mean_log;
    Ok(lhs / (len.powf(1.5) * grad.sqrt()))
}

/// Worst ratio of `s^ν/(3s²+ε)` to `½(ν/3)^{ν/2}(2−ν)^{(2−ν)/2}ε^{−(2−ν)/2}`.
///
/// With `w = 3s²/(3s²+ε)`, `a = ν/2` and `b = 1 − a` the ratio equals
/// `(w/a)^a ((1−w)/b)^b`, which is evaluated through `ln_1p` of the offset
/// `w − a` so that rounding cannot lift it above its maximum 1 at `w = a`.
pub fn check_mollifier_bound(nu: f64, eps: f64, s_samples: &[f64]) -> Result<f64> {
    if !(0.0..=2.0).contains(&nu) {
        return Err(Error::InvalidParameter {
            name: "nu",
            value: nu,
            reason: "must lie in [0, 2]",
        });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must lie in (0, 1)",
        });
    }
    let a = nu / 2.0;
    let b = 1.0 - a;
    let mut worst = 0.0f64;
    for &s in s_samples {
        if !(s >= 0.0) {
            return Err(Error::Domain {
                func: "check_mollifier_bound",
                value: s,
            });
        }
        let t = 3.0 * s * s;
        let w = t / (t + eps);
        let w_c = eps / (t + eps);
        let d = w - a;
        let r = if a == 0.0 {
            w_c
        } else if b == 0.0 {
            w
        } else if w == 0.0 {
            0.0
        } else if d.abs() < 0.5 * a.min(b) {
            (a * (d / a).ln_1p() + b * (-d / b).ln_1p()).exp()
        } else {
            (a * (w / a).ln() + b * (w_c / b).ln()).exp()
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Worst ratios for `h ≤ s`, `h' ≤ 5−n` and the `s^{−3/2}` curvature bound.
pub fn check_hflux_bounds(n: f64, eps: f64, s_samples: &[f64]) -> Result<[f64; 3]> {
    let curvature = 2f64.powf(-(7.0 - 2.0 * n) / (2.0 * (4.0 - n)))
        * (4.0 - n)
        * (5.0 - n)
        * eps.powf(1.0 / (2.0 * (4.0 - n)));
    let mut worst = [0.0f64; 3];
    for &s in s_samples {
        if !(s > 0.0) {
            return Err(Error::Domain {
                func: "check_hflux_bounds",
                value: s,
            });
        }
        let h = h_flux(s, n, eps)?;
        let hp = h_flux_prime(s, n, eps)?;
        let hpp = h_flux_second(s, n, eps)?;
        // h/s and h'/(5−n) in forms that are ≤ 1 after rounding
        let a = s.powf(4.0 - n);
        let q = a / (a + eps);
        let r_value = if h == 0.0 { 0.0 } else { q };
        let r_slope = q * ((a + (5.0 - n) * eps) / ((5.0 - n) * (a + eps)));
        debug_assert!((r_value * s - h).abs() <= 1e-12 * s);
        debug_assert!((r_slope * (5.0 - n) - hp).abs() <= 1e-10 * (5.0 - n));
        let r_curv = hpp.abs() * s.powf(1.5) / curvature;
        worst = [worst[0].max(r_value), worst[1].max(r_slope), worst[2].max(r_curv)];
    }
    Ok(worst)
}

/// Worst ratios of `ln ξ ≤ 2√ξ` over `ξ ≥ 1` and of `−ξ² ln ξ ≤ 1/(2e)` over
/// `ξ ∈ (0, 1]`; samples outside the respective range are skipped.
pub fn check_elementary_log_bounds(xi_samples: &[f64]) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for &xi in xi_samples {
        if xi >= 1.0 {
            worst.0 = worst.0.max(xi.ln() / (2.0 * xi.sqrt()));
        }
        if xi > 0.0 && xi <= 1.0 {
            worst.1 = worst.1.max(-xi * xi * xi.ln() * 2.0 * std::f64::consts::E);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OdeComparison {
    pub held: bool,
    /// Largest `y(t)/bound(t)` over the sample grid.
    pub worst_ratio: f64,
}

/// Integrates `y' = b − a y^β` from `y(t0) = y0` with RK4 on the sample
/// grid `t0 + k (T − t0)/10⁵`, substepping wherever the linearized
/// stiffness `a β y^{β−1}` would make a step unstable, and compares `y`
/// with `((β−1)a(t−t0))^{−1/(β−1)} + (b/a)^{1/β}` at every sample `t > t0`.
pub fn ode_comparison_bound(t0: f64, a: f64, b: f64, beta: f64, y0: f64, t_end: f64) -> Result<OdeComparison> {
    if !(beta > 1.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must exceed 1",
        });
    }
    for (name, value) in [("a", a), ("b", b)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                value,
                reason: "must be positive",
            });
        }
    }
    if !(y0 >= 0.0 && y0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "y0",
            value: y0,
            reason: "must be nonnegative",
        });
    }
    if !(t_end > t0) {
        return Err(Error::InvalidParameter {
            name: "T",
            value: t_end,
            reason: "must exceed t0",
        });
    }
    const SAMPLES: usize = 100_000;
    const STIFF_LIMIT: f64 = 0.05;
    // Integrate the offset z = y − y_eq. Writing b − a y^β as
    // −b expm1(β ln_1p(z/y_eq)) keeps z from stalling a few hundred ulps
    // above the equilibrium once steps become small, which would otherwise
    // swamp the vanishing gap between y and the bound.
    let equilibrium = (b / a).powf(1.0 / beta);
    let rhs = |z: f64| -b * (beta * (z / equilibrium).max(-1.0).ln_1p()).exp_m1();
    let rk4 = |z: f64, h: f64| {
        let k1 = rhs(z);
        let k2 = rhs(z + 0.5 * h * k1);
        let k3 = rhs(z + 0.5 * h * k2);
        let k4 = rhs(z + h * k3);
        z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let dt = (t_end - t0) / SAMPLES as f64;
    let mut z = y0 - equilibrium;
    let mut worst = 0.0f64;
    for k in 1..=SAMPLES {
        let mut left = dt;
        while left > 0.0 {
            let y = (equilibrium + z).max(0.0);
            let stiffness = a * beta * y.powf(beta - 1.0);
            let h = if stiffness * left > STIFF_LIMIT { STIFF_LIMIT / stiffness } else { left };
            z = rk4(z, h);
            left -= h;
            if left < 1e-15 * dt {
                left = 0.0;
            }
        }
        let t = k as f64 * dt;
        let decay = ((beta - 1.0) * a * t).powf(-1.0 / (beta - 1.0));
        worst = worst.max((equilibrium + z) / (equilibrium + decay));
    }
    Ok(OdeComparison {
        held: worst <= 1.0,
        worst_ratio: worst,
    })
}

/// `c₀ + Σ_k a_k cos(kπ(x − x_left)/|Ω|)` with 1–4 random modes, affinely
/// rescaled so its values fill a random subinterval of `[lo, hi]`.
pub fn random_trig_field(grid: &Grid1D, rng: &mut impl Rng, lo: f64, hi: f64) -> Field {
    let modes = rng.gen_range(1..=4usize);
    let amps: Vec<(f64, f64)> = (0..modes)
        .map(|_| (rng.gen_range(1..=6u32) as f64, rng.gen_range(-1.0..1.0)))
        .collect();
    let wave = std::f64::consts::PI / grid.length();
    let raw = |x: f64| -> f64 {
        amps.iter()
            .map(|&(k, a)| a * (k * wave * (x - grid.x_left())).cos())
            .sum()
    };
    // extrema over a fine sampling of the closed interval
    let fine = 4096;
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=fine {
        let r = raw(grid.x_left() + grid.length() * i as f64 / fine as f64);
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    let a = rng.gen_range(lo..hi);
    let b = rng.gen_range(lo..hi);
    let (target_lo, target_hi) = (a.min(b), a.max(b).max(a.min(b) + 1e-3 * (hi - lo)).min(hi));
    let scale = if rmax > rmin { (target_hi - target_lo) / (rmax - rmin) } else { 0.0 };
    Field::from_fn(*grid, |x| target_lo + scale * (raw(x) - rmin))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Bernis,
    Interp,
    Mollifier,
    Hflux,
    Ode,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "all" => Suite::All,
            "bernis" => Suite::Bernis,
            "interp" => Suite::Interp,
            "mollifier" => Suite::Mollifier,
            "hflux" => Suite::Hflux,
            "ode" => Suite::Ode,
            other => return Err(format!("unknown suite `{other}`")),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    pub n_cells: usize,
    pub fields: usize,
    /// Restrict the thin-film check to one exponent instead of the default
    /// sweep.
    pub beta: Option<f64>,
    pub ode_draws: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n_cells: 400,
            fields: 200,
            beta: None,
            ode_draws: 100,
        }
    }
}

fn field_rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(index as u128 * 1024);
    rng
}

fn field_payload(f: &Field) -> Value {
    json!({ "x_left": f.grid().x_left(), "x_right": f.grid().x_right(), "values": f.values() })
}

fn quadrature_check(
    name: &str,
    opts: &SuiteOptions,
    stream: u64,
    params: &[Value],
    check: impl Fn(&Field, usize) -> Result<f64> + Sync,
) -> Result<CheckReport> {
    let grid = Grid1D::unit(opts.n_cells)?;
    let per = params.len();
    let results: Result<Vec<(f64, Value)>> = (0..opts.fields * per)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / per, idx % per);
            let mut rng = field_rng(opts.seed, stream, i);
            let f = random_trig_field(&grid, &mut rng, 0.5, 3.0);
            let r = check(&f, j)?;
            Ok((r, json!({ "params": params[j], "field": field_payload(&f) })))
        })
        .collect();
    Ok(CheckReport::from_samples(name, QUADRATURE_TOLERANCE, results?))
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

pub fn bernis_report(opts: &SuiteOptions) -> Result<CheckReport> {
    let betas: Vec<f64> = match opts.beta {
        Some(b) => vec![b],
        None => vec![-1.0, 0.0, 2.0, 3.0],
    };
    let params: Vec<Value> = betas.iter().map(|b| json!({ "beta": b })).collect();
    quadrature_check("bernis", opts, 1, &params, |f, j| check_bernis(f, betas[j]))
}

pub fn interp_reports(opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let ns = [1.0, 1.5];
    let params: Vec<Value> = ns.iter().map(|n| json!({ "p": 3.0 - n, "q": 3.0 - n })).collect();
    let lower = quadrature_check("interp_lower", opts, 2, &params, |f, j| {
        check_interp_lower(f, 3.0 - ns[j], 3.0 - ns[j])
    })?;
    let log = quadrature_check("interp_log", opts, 3, &[Value::Null], |f, _| check_interp_log(f))?;
    Ok(vec![lower, log])
}

pub fn mollifier_reports() -> Result<Vec<CheckReport>> {
    let mut s = vec![0.0];
    s.extend(log_spaced(1e-8, 1e8, 20_001));
    let mut results = Vec::new();
    for nu in [0.0, 0.5, 1.0, 1.5, 2.0] {
        for eps in [1e-4, 1e-2, 0.5] {
            results.push((check_mollifier_bound(nu, eps, &s)?, json!({ "nu": nu, "eps": eps })));
        }
    }
    let mollifier = CheckReport::from_samples("mollifier", POINTWISE_TOLERANCE, results);
    let xi = log_spaced(1e-12, 1e12, 20_001);
    let (growth, floor) = check_elementary_log_bounds(&xi);
    let logs = CheckReport::from_samples(
        "elementary_log_bounds",
        POINTWISE_TOLERANCE,
        vec![
            (growth, json!({ "bound": "ln xi <= 2 sqrt(xi)" })),
            (floor, json!({ "bound": "xi^2 ln xi >= -1/(2e)" })),
        ],
    );
    Ok(vec![mollifier, logs])
}

pub fn hflux_reports() -> Result<Vec<CheckReport>> {
    let s = log_spaced(1e-6, 1e4, 10_001);
    let mut by_kind: [Vec<(f64, Value)>; 3] = Default::default();
    for n in [0.0, 1.0, 1.5, 2.0, 3.0, 3.5] {
        for eps in [1e-6, 1e-4, 1e-2, 0.5] {
            let r = check_hflux_bounds(n, eps, &s)?;
            for k in 0..3 {
                by_kind[k].push((r[k], json!({ "n": n, "eps": eps })));
            }
        }
    }
    let [value, slope, curvature] = by_kind;
    Ok(vec![
        CheckReport::from_samples("hflux_value", POINTWISE_TOLERANCE, value),
        CheckReport::from_samples("hflux_slope", POINTWISE_TOLERANCE, slope),
        CheckReport::from_samples("hflux_curvature", POINTWISE_TOLERANCE, curvature),
    ])
}

pub fn ode_report(opts: &SuiteOptions) -> Result<CheckReport> {
    let results: Result<Vec<(f64, Value)>> = (0..opts.ode_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = field_rng(opts.seed, 4, i);
            let a = rng.gen_range(0.1..=10.0);
            let b = rng.gen_range(0.1..=10.0);
            // β ∈ (1, 3]
            let beta = 3.0 - rng.gen_range(0.0..2.0);
            let y0 = rng.gen_range(0.0..=1e6);
            let out = ode_comparison_bound(0.0, a, b, beta, y0, 10.0)?;
            Ok((out.worst_ratio, json!({ "t0": 0.0, "T": 10.0, "a": a, "b": b, "beta": beta, "y0": y0 })))
        })
        .collect();
    Ok(CheckReport::from_samples("ode_comparison", 0.0, results?))
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    if matches!(suite, Suite::All | Suite::Bernis) {
        reports.push(bernis_report(opts)?);
    }
    if matches!(suite, Suite::All | Suite::Interp) {
        reports.extend(interp_reports(opts)?);
    }
    if matches!(suite, Suite::All | Suite::Mollifier) {
        reports.extend(mollifier_reports()?);
    }
    if matches!(suite, Suite::All | Suite::Hflux) {
        reports.extend(hflux_reports()?);
    }
    if matches!(suite, Suite::All | Suite::Ode) {
        reports.push(ode_report(opts)?);
    }
    Ok(reports)
}
