//! Energies, dissipation rates and other scalar diagnostics of a state,
//! plus the space-time residual of the weak formulation along a run.
//!
//! All integrals use midpoint quadrature at cell centers with derivatives
//! from [`diff1`]/[`diff2`]. The ε-dependent summands use
//! [`RegParams::eps_for`], so they vanish for [`ModelKind::Limit`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{diff1, diff2, face_gradient, face_mean, Field, Grid1D};
use crate::model::{h_eps, KineticParams, ModelKind, RegParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Coexistence,
    Extinction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStates {
    pub u_star: f64,
    pub v_star: f64,
    pub regime: Regime,
}

/// Homogeneous attractor of the kinetics. A tie `λ₂ = a₂λ₁` counts as
/// extinction.
pub fn steady_states(kp: &KineticParams) -> SteadyStates {
    if kp.lambda2 > kp.a2 * kp.lambda1 {
        let det = 1.0 + kp.a1 * kp.a2;
        SteadyStates {
            u_star: (kp.lambda1 + kp.a1 * kp.lambda2) / det,
            v_star: (kp.lambda2 - kp.a2 * kp.lambda1) / det,
            regime: Regime::Coexistence,
        }
    } else {
        SteadyStates {
            u_star: kp.lambda1,
            v_star: 0.0,
            regime: Regime::Extinction,
        }
    }
}

/// Upper bound for the eventual total mass `∫u + ∫v`.
pub fn m_infinity(kp: &KineticParams, omega_len: f64) -> Result<f64> {
    if !(omega_len > 0.0 && omega_len.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "omega_len",
            value: omega_len,
            reason: "must be positive",
        });
    }
    let c = 1.0 / (2.0 * 3f64.sqrt());
    let m = (kp.a1 * kp.a1).max(1.0);
    let first = kp.lambda1 + c + 1.0 + m * kp.a2 * c;
    let second = kp.lambda2 + c + 1.0;
    Ok(0.5 * omega_len * first * first + 0.5 * omega_len * second * second * m)
}

/// `φ_{ξ*}(ξ) = ξ − ξ* − ξ* ln(ξ/ξ*)`.
pub fn phi(xi_star: f64, xi: f64) -> Result<f64> {
    if !(xi_star > 0.0) {
        return Err(Error::Domain { func: "phi", value: xi_star });
    }
    if !(xi > 0.0) {
        return Err(Error::Domain { func: "phi", value: xi });
    }
    Ok(phi_unchecked(xi_star, xi))
}

fn phi_unchecked(xi_star: f64, xi: f64) -> f64 {
    // ln_1p keeps full relative accuracy near ξ = ξ*
    let r = (xi - xi_star) / xi_star;
    (xi_star * (r - r.ln_1p())).max(0.0)
}

fn quad(grid: &Grid1D, values: impl Iterator<Item = f64>) -> f64 {
    grid.dx() * values.sum::<f64>()
}

fn quad_field(f: &Field, g: impl Fn(f64) -> f64) -> f64 {
    quad(f.grid(), f.values().iter().map(|&x| g(x)))
}

fn quad_with_slope(f: &Field, g: impl Fn(f64, f64) -> f64) -> f64 {
    let fx = diff1(f);
    quad(f.grid(), f.values().iter().zip(fx.values()).map(|(&s, &sx)| g(s, sx)))
}

/// Entropy part `∫s ln s − ∫s + ε/((3−n)(4−n)) ∫s^{−(3−n)}`.
fn log_entropy(f: &Field, n: f64, eps: f64) -> f64 {
    let c = eps / ((3.0 - n) * (4.0 - n));
    quad_field(f, |s| s * s.ln() - s + c * s.powf(n - 3.0))
}

fn log_dissipation(f: &Field, diff: f64, n: f64, eps: f64) -> f64 {
    let fxx = diff2(f);
    let fx = diff1(f);
    quad(
        f.grid(),
        f.values()
            .iter()
            .zip(fx.values())
            .zip(fxx.values())
            .map(|((&s, &sx), &sxx)| {
                0.5 * diff * sx * sx / s
                    + eps * s.powf(n - 1.0) * sxx * sxx
                    + diff * eps * sx * sx / s.powf(5.0 - n)
            }),
    )
}

/// Quasi-entropy `F` of the coupled system.
pub fn quasi_entropy_f(state: &State, kp: &KineticParams, rp: &RegParams, kind: ModelKind) -> Result<f64> {
    state.check()?;
    let eps = rp.eps_for(kind);
    Ok(log_entropy(&state.u, rp.n1, eps) + kp.chi_ratio() * log_entropy(&state.v, rp.n2, eps))
}

/// Dissipation rate `D` accompanying [`quasi_entropy_f`].
pub fn dissipation_d(state: &State, kp: &KineticParams, rp: &RegParams, kind: ModelKind) -> Result<f64> {
    state.check()?;
    let eps = rp.eps_for(kind);
    Ok(log_dissipation(&state.u, kp.d1, rp.n1, eps) + kp.chi_ratio() * log_dissipation(&state.v, kp.d2, rp.n2, eps))
}

/// Coexistence entropy `E₁`; undefined in the extinction regime.
pub fn entropy_e1(state: &State, kp: &KineticParams, rp: &RegParams, kind: ModelKind) -> Result<f64> {
    state.check()?;
    let ss = coexistence(kp)?;
    let eps = rp.eps_for(kind);
    let a = kp.a_ratio();
    let (us, vs) = (ss.u_star, ss.v_star);
    Ok(quad_field(&state.u, |s| phi_unchecked(us, s) + us * eps / 6.0 / (s * s))
        + a * quad_field(&state.v, |s| phi_unchecked(vs, s) + vs * eps / 6.0 / (s * s)))
}

/// Dissipation rate `D₁` paired with [`entropy_e1`].
pub fn dissipation_rate_d1(state: &State, kp: &KineticParams, rp: &RegParams, kind: ModelKind) -> Result<f64> {
    state.check()?;
    let ss = coexistence(kp)?;
    let eps = rp.eps_for(kind);
    let c = eps.powf(0.5 * (rp.alpha + 2.0));
    let alpha = rp.alpha;
    let term = |f: &Field, star: f64| {
        quad_with_slope(f, |s, sx| {
            sx * sx / (s * s) + (s - star) * (s - star) + c * s.powf(-alpha - 4.0) * sx * sx
        })
    };
    Ok(term(&state.u, ss.u_star) + term(&state.v, ss.v_star))
}

fn coexistence(kp: &KineticParams) -> Result<SteadyStates> {
    let ss = steady_states(kp);
    if ss.regime != Regime::Coexistence {
        return Err(Error::Precondition(
            "the coexistence entropy needs lambda2 > a2 * lambda1".into(),
        ));
    }
    Ok(ss)
}

/// Extinction entropy `E₂`.
pub fn entropy_e2(state: &State, kp: &KineticParams, rp: &RegParams, kind: ModelKind) -> Result<f64> {
    state.check()?;
    let eps = rp.eps_for(kind);
    let a = kp.a_ratio();
    let (l1, l2) = (kp.lambda1, kp.lambda2);
    Ok(quad_field(&state.u, |s| phi_unchecked(l1, s) + l1 * eps / 6.0 / (s * s))
        + a * quad_field(&state.v, |s| s + s * s / (2.0 * l2) + eps / (2.0 * l2 * s)))
}

/// Dissipation rate `D₂` paired with [`entropy_e2`].
pub fn dissipation_rate_d2(state: &State, kp: &KineticParams, rp: &RegParams, kind: ModelKind) -> Result<f64> {
    state.check()?;
    let eps = rp.eps_for(kind);
    let c = eps.powf(0.5 * (rp.alpha + 2.0));
    let alpha = rp.alpha;
    let l1 = kp.lambda1;
    Ok(quad_with_slope(&state.u, |s, sx| {
        sx * sx / (s * s) + (s - l1) * (s - l1) + c * s.powf(-alpha - 4.0) * sx * sx
    }) + quad_with_slope(&state.v, |s, sx| sx * sx + s * s * s + c * s.powf(-alpha - 3.0) * sx * sx))
}

/// `∫u_x² + γ ∫v_x²`.
pub fn conditional_y(state: &State, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must be positive",
        });
    }
    let (hu, hv) = h1_seminorms(state);
    Ok(hu + gamma * hv)
}

fn h1_seminorms(state: &State) -> (f64, f64) {
    let sq = |f: &Field| quad_with_slope(f, |_, sx| sx * sx);
    (sq(&state.u), sq(&state.v))
}

/// One sampled row of every scalar diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "D")]
    pub d: f64,
    /// `None` in the extinction regime.
    #[serde(rename = "E1")]
    pub e1: Option<f64>,
    #[serde(rename = "D1")]
    pub d1: Option<f64>,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    pub y: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub max_v: f64,
    pub h1_u: f64,
    pub h1_v: f64,
}

pub fn diagnostics(
    state: &State,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
    gamma: f64,
) -> Result<DiagnosticsRecord> {
    state.check()?;
    let coexist = steady_states(kp).regime == Regime::Coexistence;
    let (h1_u, h1_v) = h1_seminorms(state);
    Ok(DiagnosticsRecord {
        t: state.t,
        mass_u: quad_field(&state.u, |s| s),
        mass_v: quad_field(&state.v, |s| s),
        f: quasi_entropy_f(state, kp, rp, kind)?,
        d: dissipation_d(state, kp, rp, kind)?,
        e1: if coexist { Some(entropy_e1(state, kp, rp, kind)?) } else { None },
        d1: if coexist { Some(dissipation_rate_d1(state, kp, rp, kind)?) } else { None },
        e2: entropy_e2(state, kp, rp, kind)?,
        d2: dissipation_rate_d2(state, kp, rp, kind)?,
        y: conditional_y(state, gamma)?,
        min_u: state.u.min(),
        min_v: state.v.min(),
        max_u: state.u.max(),
        max_v: state.v.max(),
        h1_u,
        h1_v,
    })
}

/// Smooth space-time test function with analytic derivatives.
pub trait TestFunction {
    fn value(&self, x: f64, t: f64) -> f64;
    fn dx(&self, x: f64, t: f64) -> f64;
    fn dt(&self, x: f64, t: f64) -> f64;
}

/// `cos(kπ(x − x_left)/|Ω|) · ψ(t)` where
/// `ψ(t) = exp(1 − 1/(1 − s²))`, `s = (t − t_start)/(t_end − t_start)`,
/// equals 1 at `t_start` and vanishes to infinite order at `t_end`.
#[derive(Debug, Clone, Copy)]
pub struct CosineBump {
    pub mode: u32,
    pub x_left: f64,
    pub length: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl CosineBump {
    pub fn on(grid: &Grid1D, mode: u32, t_start: f64, t_end: f64) -> Self {
        Self {
            mode,
            x_left: grid.x_left(),
            length: grid.length(),
            t_start,
            t_end,
        }
    }

    fn wave(&self) -> f64 {
        self.mode as f64 * std::f64::consts::PI / self.length
    }

    fn psi(&self, t: f64) -> (f64, f64) {
        let tau = self.t_end - self.t_start;
        let s = (t - self.t_start) / tau;
        if s >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - s * s;
        let p = (1.0 - 1.0 / q).exp();
        (p, -p * 2.0 * s / (q * q) / tau)
    }
}

impl TestFunction for CosineBump {
    fn value(&self, x: f64, t: f64) -> f64 {
        (self.wave() * (x - self.x_left)).cos() * self.psi(t).0
    }

    fn dx(&self, x: f64, t: f64) -> f64 {
        -self.wave() * (self.wave() * (x - self.x_left)).sin() * self.psi(t).0
    }

    fn dt(&self, x: f64, t: f64) -> f64 {
        (self.wave() * (x - self.x_left)).cos() * self.psi(t).1
    }
}

/// Absolute defects of the two weak-form identities of the limit system
/// along `samples`, with the first sample taken as initial data.
///
/// Space integrals use midpoint quadrature, time integrals the trapezoid
/// rule over the (possibly nonuniform) sample times.
pub fn weak_residual(samples: &[State], kp: &KineticParams, test: &impl TestFunction) -> Result<(f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::Precondition(format!(
            "weak residual needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    kp.validate()?;
    let grid = *samples[0].grid();
    let xs = grid.centers();
    let dx = grid.dx();
    let mut integrands = Vec::with_capacity(samples.len());
    for s in samples {
        if s.grid() != &grid || s.v.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        let (u, v) = (s.u.values(), s.v.values());
        let ux = diff1(&s.u);
        let vx = diff1(&s.v);
        let (mut gu, mut gv) = (0.0, 0.0);
        for i in 0..xs.len() {
            let (p, px, pt) = (test.value(xs[i], s.t), test.dx(xs[i], s.t), test.dt(xs[i], s.t));
            let (uxi, vxi) = (ux.values()[i], vx.values()[i]);
            gu += -u[i] * pt + kp.d1 * uxi * px
                - kp.chi1 * u[i] * vxi * px
                - u[i] * (kp.lambda1 - u[i] + kp.a1 * v[i]) * p;
            gv += -v[i] * pt + kp.d2 * vxi * px + kp.chi2 * v[i] * uxi * px
                - v[i] * (kp.lambda2 - v[i] - kp.a2 * u[i]) * p;
        }
        integrands.push((s.t, gu * dx, gv * dx));
    }
    let (mut ru, mut rv) = (0.0, 0.0);
    for w in integrands.windows(2) {
        let h = w[1].0 - w[0].0;
        ru += 0.5 * h * (w[0].1 + w[1].1);
        rv += 0.5 * h * (w[0].2 + w[1].2);
    }
    let first = &samples[0];
    for ((&x, &u0), &v0) in xs.iter().zip(first.u.values()).zip(first.v.values()) {
        let p0 = test.value(x, first.t) * dx;
        ru -= u0 * p0;
        rv -= v0 * p0;
    }
    Ok((ru.abs(), rv.abs()))
}

/// The two cross-diffusive entropy productions that cancel in `dF/dt`.
///
/// Testing the predator equation against `L₁'(u)` turns its taxis flux into
/// `χ₁ Σ h₁(ū) L₁''(ū) u_x v_x`; the prey equation weighted by `χ₁/χ₂` gives
/// the same face sum with opposite sign, since `h(s) L''(s) = 1` with
/// `L''(s) = 1/s + ε/s^{5−n}`.
pub fn cross_term_productions(
    state: &State,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> Result<(f64, f64)> {
    state.check()?;
    let grid = state.grid();
    let eps = rp.eps_for(kind);
    let (u, v) = (state.u.values(), state.v.values());
    let (ub, vb) = (face_mean(u), face_mean(v));
    let (ux, vx) = (face_gradient(u, grid.dx()), face_gradient(v, grid.dx()));
    let l2 = |s: f64, n: f64| 1.0 / s + eps / s.powf(5.0 - n);
    let (mut from_u, mut from_v) = (0.0, 0.0);
    for j in 1..u.len() {
        let cu = h_eps(ub[j], rp.n1, eps) * l2(ub[j], rp.n1);
        let cv = h_eps(vb[j], rp.n2, eps) * l2(vb[j], rp.n2);
        from_u += cu * ux[j] * vx[j];
        from_v += cv * ux[j] * vx[j];
    }
    let dx = grid.dx();
    Ok((kp.chi1 * dx * from_u, -kp.chi_ratio() * kp.chi2 * dx * from_v))
}
