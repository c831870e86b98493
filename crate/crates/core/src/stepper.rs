//! Time integration: a linearly implicit IMEX Euler scheme and a fully
//! implicit backward Euler scheme solved by damped Newton iteration, both
//! driven by an adaptive step-size loop that rejects non-positive states.
//!
//! IMEX treats the fourth-order term and all second-order self-diffusion
//! implicitly with coefficients frozen at the old time level; the taxis
//! fluxes and the reactions are explicit. Each field then needs one
//! pentadiagonal solve per step.
//!
//! The fully implicit scheme works on the interleaved unknown vector
//! `(u0, v0, u1, v1, ...)`, which keeps the coupled Jacobian banded with
//! half-width 5.

use serde::{Deserialize, Serialize};

use crate::banded::BandedMatrix;
use crate::error::{Error, Result, RunFailure};
use crate::grid::{divergence_unchecked, face_gradient, FaceStencils, Field, Grid1D};
use crate::model::{
    flux_coefficients, reaction_jacobian, reactions, rhs_unchecked, FluxCoefficients,
    KineticParams, ModelKind, RegParams, Species, State,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Imex,
    FullyImplicit,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "imex" => Ok(Scheme::Imex),
            "fully_implicit" | "implicit" => Ok(Scheme::FullyImplicit),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub scheme: Scheme,
    /// Max-norm of the backward Euler residual at which Newton stops.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub positivity_floor: f64,
    /// Step shrink factor after a rejection.
    pub safety: f64,
    /// Step growth factor after an acceptance.
    pub growth: f64,
    /// Replace the frozen-coefficient Newton Jacobian by a banded
    /// finite-difference Jacobian of the full right-hand side.
    pub fd_jacobian: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-10,
            dt_max: 1e-2,
            scheme: Scheme::Imex,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            positivity_floor: 1e-12,
            safety: 0.5,
            growth: 1.2,
            fd_jacobian: false,
        }
    }
}

impl StepperConfig {
    /// A configuration that never changes the step size.
    pub fn fixed(dt: f64, scheme: Scheme) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            scheme,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stepper.dt_init", self.dt_init),
            ("stepper.dt_min", self.dt_min),
            ("stepper.dt_max", self.dt_max),
            ("stepper.newton_tol", self.newton_tol),
            ("stepper.positivity_floor", self.positivity_floor),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::InvalidParameter {
                name: "stepper.dt_init",
                value: self.dt_init,
                reason: "must satisfy dt_min <= dt_init <= dt_max",
            });
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::InvalidParameter {
                name: "stepper.safety",
                value: self.safety,
                reason: "must lie in (0, 1)",
            });
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "stepper.growth",
                value: self.growth,
                reason: "must be at least 1",
            });
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "stepper.newton_max_iter",
                value: 0.0,
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// The new state when accepted, the unchanged input state otherwise.
    pub state: State,
    pub dt_used: f64,
    pub accepted: bool,
    pub newton_iters: usize,
    /// Minima of the attempted state (NaN when no candidate was produced).
    pub min_u: f64,
    pub min_v: f64,
}

/// Everything that stays fixed along one integration.
struct Problem<'a> {
    grid: Grid1D,
    stencils: FaceStencils,
    kp: &'a KineticParams,
    rp: &'a RegParams,
    kind: ModelKind,
    cfg: &'a StepperConfig,
}

fn check_inputs(
    state: &State,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
    cfg: &StepperConfig,
) -> Result<()> {
    state.check()?;
    kp.validate()?;
    if kind == ModelKind::Regularized {
        rp.validate()?;
    }
    cfg.validate()
}

/// Advances `state` by one step of size `dt`.
///
/// A rejected step (non-positive candidate or Newton failure) is reported
/// through `accepted = false`; shrinking `dt` is left to the caller.
pub fn step(
    state: &State,
    dt: f64,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
    cfg: &StepperConfig,
) -> Result<StepOutcome> {
    check_inputs(state, kp, rp, kind, cfg)?;
    if !(dt >= cfg.dt_min && dt <= cfg.dt_max) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "must lie in [dt_min, dt_max]",
        });
    }
    let problem = Problem {
        grid: *state.grid(),
        stencils: FaceStencils::new(state.grid()),
        kp,
        rp,
        kind,
        cfg,
    };
    Ok(problem.step(state, dt))
}

impl Problem<'_> {
    fn step(&self, state: &State, dt: f64) -> StepOutcome {
        let u = state.u.values();
        let v = state.v.values();
        let (candidate, iters) = match self.cfg.scheme {
            Scheme::Imex => (self.imex(u, v, dt), 0),
            Scheme::FullyImplicit => match self.newton(u, v, dt) {
                Ok((w, it)) => (Some(w), it),
                Err(it) => (None, it),
            },
        };
        let rejected = |min_u, min_v| StepOutcome {
            state: state.clone(),
            dt_used: dt,
            accepted: false,
            newton_iters: iters,
            min_u,
            min_v,
        };
        let Some((nu, nv)) = candidate else {
            return rejected(f64::NAN, f64::NAN);
        };
        let min_u = nu.iter().copied().fold(f64::INFINITY, f64::min);
        let min_v = nv.iter().copied().fold(f64::INFINITY, f64::min);
        let finite = nu.iter().chain(&nv).all(|x| x.is_finite());
        let floor = self.cfg.positivity_floor;
        if !(finite && min_u > floor && min_v > floor) {
            return rejected(min_u, min_v);
        }
        StepOutcome {
            state: State {
                t: state.t + dt,
                u: Field::from_vec_unchecked(self.grid, nu),
                v: Field::from_vec_unchecked(self.grid, nv),
            },
            dt_used: dt,
            accepted: true,
            newton_iters: iters,
            min_u,
            min_v,
        }
    }

    fn coefficients(&self, u: &[f64], v: &[f64]) -> (FluxCoefficients, FluxCoefficients) {
        (
            flux_coefficients(u, Species::Predator, self.kp, self.rp, self.kind),
            flux_coefficients(v, Species::Prey, self.kp, self.rp, self.kind),
        )
    }

    /// Adds `scale · div(F)` to `mat`, where the face flux `F_j` is the linear
    /// combination `entries` of unknowns; `row`/`col` map cells to indices.
    fn add_face_flux(
        &self,
        mat: &mut BandedMatrix,
        j: usize,
        entries: impl Iterator<Item = (usize, f64)>,
        scale: f64,
        row: impl Fn(usize) -> usize,
        col: impl Fn(usize) -> usize,
    ) {
        let s = scale / self.grid.dx();
        for (c, w) in entries {
            if w == 0.0 {
                continue;
            }
            mat.add(row(j - 1), col(c), s * w);
            mat.add(row(j), col(c), -s * w);
        }
    }

    /// Face stencil of `-fourth · w_xxx + second · w_x` at face `j`.
    fn self_flux_entries<'c>(
        &'c self,
        coeff: &'c FluxCoefficients,
        j: usize,
    ) -> impl Iterator<Item = (usize, f64)> + 'c {
        let g = self.stencils.gradient[j].iter().map(move |&(c, w)| (c, coeff.second[j] * w));
        let t = self.stencils.third[j]
            .iter()
            .filter(move |_| coeff.fourth[j] != 0.0)
            .map(move |&(c, w)| (c, -coeff.fourth[j] * w));
        g.chain(t)
    }

    fn imex(&self, u: &[f64], v: &[f64], dt: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = u.len();
        let dx = self.grid.dx();
        let (cu, cv) = self.coefficients(u, v);
        let ux = face_gradient(u, dx);
        let vx = face_gradient(v, dx);
        let taxis_u: Vec<f64> = (0..=n).map(|j| cu.taxis[j] * vx[j]).collect();
        let taxis_v: Vec<f64> = (0..=n).map(|j| cv.taxis[j] * ux[j]).collect();
        let eu = divergence_unchecked(&taxis_u, &self.grid);
        let ev = divergence_unchecked(&taxis_v, &self.grid);
        let mut bu = Vec::with_capacity(n);
        let mut bv = Vec::with_capacity(n);
        for i in 0..n {
            let (ru, rv) = reactions(u[i], v[i], self.kp, self.rp, self.kind);
            bu.push(u[i] + dt * (eu.values()[i] + ru));
            bv.push(v[i] + dt * (ev.values()[i] + rv));
        }
        let solve = |coeff: &FluxCoefficients, mut rhs: Vec<f64>| -> Option<Vec<f64>> {
            let mut mat = BandedMatrix::zeros(n, 2, 2);
            for i in 0..n {
                mat.add(i, i, 1.0);
            }
            for j in 1..n {
                self.add_face_flux(&mut mat, j, self.self_flux_entries(coeff, j), -dt, |c| c, |c| c);
            }
            let lu = mat.factor().ok()?;
            lu.solve_in_place(&mut rhs);
            Some(rhs)
        };
        Some((solve(&cu, bu)?, solve(&cv, bv)?))
    }

    fn residual(&self, w: &[f64], w0: &[f64], dt: f64) -> Vec<f64> {
        let (u, v) = split(w);
        let (du, dv) = rhs_unchecked(&u, &v, &self.grid, self.kp, self.rp, self.kind);
        let mut r = vec![0.0; w.len()];
        for i in 0..u.len() {
            r[2 * i] = w[2 * i] - w0[2 * i] - dt * du.values()[i];
            r[2 * i + 1] = w[2 * i + 1] - w0[2 * i + 1] - dt * dv.values()[i];
        }
        r
    }

    /// `I - dt · J_rhs` with face coefficients frozen at `w`.
    fn frozen_jacobian(&self, w: &[f64], dt: f64) -> BandedMatrix {
        let n = w.len() / 2;
        let (u, v) = split(w);
        let (cu, cv) = self.coefficients(&u, &v);
        let mut mat = BandedMatrix::zeros(2 * n, 5, 5);
        let ui = |c: usize| 2 * c;
        let vi = |c: usize| 2 * c + 1;
        for i in 0..n {
            let jr = reaction_jacobian(u[i], v[i], self.kp, self.rp, self.kind);
            mat.add(ui(i), ui(i), 1.0 - dt * jr[0][0]);
            mat.add(ui(i), vi(i), -dt * jr[0][1]);
            mat.add(vi(i), ui(i), -dt * jr[1][0]);
            mat.add(vi(i), vi(i), 1.0 - dt * jr[1][1]);
        }
        for j in 1..n {
            self.add_face_flux(&mut mat, j, self.self_flux_entries(&cu, j), -dt, ui, ui);
            self.add_face_flux(&mut mat, j, self.self_flux_entries(&cv, j), -dt, vi, vi);
            let grad = &self.stencils.gradient[j];
            self.add_face_flux(&mut mat, j, grad.iter().map(|&(c, g)| (c, cu.taxis[j] * g)), -dt, ui, vi);
            self.add_face_flux(&mut mat, j, grad.iter().map(|&(c, g)| (c, cv.taxis[j] * g)), -dt, vi, ui);
        }
        mat
    }

    /// `I - dt · J_rhs` by column-colored finite differences of the full
    /// right-hand side; each rhs entry depends on unknowns within ±5.
    fn fd_jacobian(&self, w: &[f64], dt: f64) -> BandedMatrix {
        const BW: usize = 5;
        let m = w.len();
        let zero = vec![0.0; m];
        // residual(w, 0, dt) = w - dt·rhs(w)
        let base = self.residual(w, &zero, dt);
        let mut mat = BandedMatrix::zeros(m, BW, BW);
        for color in 0..(2 * BW + 1) {
            let mut wp = w.to_vec();
            let mut steps = vec![0.0; m];
            for c in (color..m).step_by(2 * BW + 1) {
                let h = 1e-7 * w[c].abs().max(1e-3);
                wp[c] += h;
                steps[c] = h;
            }
            let pert = self.residual(&wp, &zero, dt);
            for c in (color..m).step_by(2 * BW + 1) {
                for r in c.saturating_sub(BW)..=(c + BW).min(m - 1) {
                    mat.set(r, c, (pert[r] - base[r]) / steps[c]);
                }
            }
        }
        mat
    }

    /// Damped Newton on the backward Euler residual. Returns the new fields
    /// and the iteration count, or the iteration count on failure.
    #[allow(clippy::type_complexity)]
    fn newton(&self, u: &[f64], v: &[f64], dt: f64) -> std::result::Result<((Vec<f64>, Vec<f64>), usize), usize> {
        let w0 = interleave(u, v);
        let mut w = w0.clone();
        let mut r = self.residual(&w, &w0, dt);
        let mut rnorm = max_norm(&r);
        let needs_positive = self.kind == ModelKind::Regularized;
        for iter in 0..=self.cfg.newton_max_iter {
            if rnorm < self.cfg.newton_tol {
                return Ok((split(&w), iter));
            }
            if iter == self.cfg.newton_max_iter || !rnorm.is_finite() {
                break;
            }
            let jac = if self.cfg.fd_jacobian {
                self.fd_jacobian(&w, dt)
            } else {
                self.frozen_jacobian(&w, dt)
            };
            let Ok(lu) = jac.factor() else {
                return Err(iter);
            };
            let mut delta: Vec<f64> = r.iter().map(|x| -x).collect();
            lu.solve_in_place(&mut delta);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let trial: Vec<f64> = w.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
                if !needs_positive || trial.iter().all(|&x| x > 0.0) {
                    let rt = self.residual(&trial, &w0, dt);
                    let nt = max_norm(&rt);
                    if nt < rnorm {
                        w = trial;
                        r = rt;
                        rnorm = nt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(iter + 1);
            }
        }
        Err(self.cfg.newton_max_iter)
    }
}

fn interleave(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).flat_map(|(&a, &b)| [a, b]).collect()
}

fn split(w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        w.iter().step_by(2).copied().collect(),
        w.iter().skip(1).step_by(2).copied().collect(),
    )
}

fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_iters: usize,
    pub dt_last: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    /// States at the first step boundary after each multiple of
    /// `sample_every`, starting with the initial state and ending with the
    /// final one.
    pub samples: Vec<State>,
    pub stats: RunStats,
}

/// Integrates to `t_end` with adaptive steps, sampling along the way.
///
/// Accepted steps grow `dt` by `growth` up to `dt_max`; rejections shrink
/// it by `safety`, and falling below `dt_min` is a hard failure that
/// carries the partial sample log. The final step is clipped to land on
/// `t_end` exactly and may therefore be shorter than `dt_min`.
#[allow(clippy::too_many_arguments)]
pub fn run_until(
    state: State,
    t_end: f64,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
    cfg: &StepperConfig,
    sample_every: f64,
    mut on_sample: impl FnMut(&State),
) -> Result<RunOutput> {
    check_inputs(&state, kp, rp, kind, cfg)?;
    if !(t_end >= state.t && t_end.is_finite()) {
        return Err(Error::Precondition(format!(
            "t_end = {t_end} must not precede the initial time {}",
            state.t
        )));
    }
    if !(sample_every > 0.0 && sample_every.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "time.sample_every",
            value: sample_every,
            reason: "must be positive",
        });
    }
    let problem = Problem {
        grid: *state.grid(),
        stencils: FaceStencils::new(state.grid()),
        kp,
        rp,
        kind,
        cfg,
    };
    let t0 = state.t;
    let sample_slack = 1e-9 * sample_every;
    let mut samples = vec![state.clone()];
    on_sample(&state);
    let mut k_next: u64 = 1;
    let mut stats = RunStats::default();
    let mut state = state;
    let mut dt = cfg.dt_init;
    while state.t < t_end {
        let remaining = t_end - state.t;
        let last = dt >= remaining * (1.0 - 1e-12);
        let dt_try = if last { remaining } else { dt };
        let out = problem.step(&state, dt_try);
        stats.newton_iters += out.newton_iters;
        if out.accepted {
            stats.accepted += 1;
            stats.dt_last = dt_try;
            state = out.state;
            if last {
                state.t = t_end;
            }
            let due = t0 + k_next as f64 * sample_every;
            if state.t >= due - sample_slack || last {
                samples.push(state.clone());
                on_sample(&state);
                while t0 + k_next as f64 * sample_every <= state.t + sample_slack {
                    k_next += 1;
                }
            }
            if !last {
                dt = (dt * cfg.growth).min(cfg.dt_max);
            }
        } else {
            stats.rejected += 1;
            let shrunk = dt_try * cfg.safety;
            if shrunk < cfg.dt_min.min(remaining) {
                return Err(Error::Run(Box::new(RunFailure {
                    t: state.t,
                    dt: shrunk,
                    dt_min: cfg.dt_min,
                    reason: if out.min_u.is_nan() {
                        "implicit solve failed".to_string()
                    } else {
                        format!("candidate minima u = {:e}, v = {:e}", out.min_u, out.min_v)
                    },
                    last_state: state,
                    samples,
                })));
            }
            dt = shrunk;
        }
    }
    Ok(RunOutput {
        final_state: state,
        samples,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use crate::model::g_eps;
    use std::f64::consts::PI;

    fn coexistence_params() -> KineticParams {
        KineticParams {
            lambda1: 1.0,
            lambda2: 2.0,
            ..KineticParams::default()
        }
    }

    fn smooth_state(n: usize) -> State {
        let g = Grid1D::unit(n).unwrap();
        State::new(
            0.0,
            Field::from_fn(g, |x| 1.5 + 0.3 * (PI * x).cos()),
            Field::from_fn(g, |x| 0.5 + 0.2 * (2.0 * PI * x).cos()),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        StepperConfig::default().validate().unwrap();
        let bad = StepperConfig { dt_init: 1.0, ..StepperConfig::default() };
        assert!(bad.validate().is_err());
        let bad = StepperConfig { safety: 1.0, ..StepperConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn steady_state_is_preserved_by_both_schemes() {
        let kp = coexistence_params();
        let rp = RegParams::default();
        let g = Grid1D::unit(32).unwrap();
        let s = State::new(0.0, Field::constant(g, 1.5), Field::constant(g, 0.5)).unwrap();
        for scheme in [Scheme::Imex, Scheme::FullyImplicit] {
            for kind in [ModelKind::Limit, ModelKind::Regularized] {
                let cfg = StepperConfig { scheme, ..StepperConfig::default() };
                let out = step(&s, 1e-3, &kp, &rp, kind, &cfg).unwrap();
                assert!(out.accepted);
                for (a, b) in out.state.u.values().iter().zip(s.u.values()) {
                    assert!((a - b).abs() <= cfg.newton_tol);
                }
                for (a, b) in out.state.v.values().iter().zip(s.v.values()) {
                    assert!((a - b).abs() <= cfg.newton_tol);
                }
            }
        }
    }

    #[test]
    fn implicit_homogeneous_step_matches_scalar_backward_euler() {
        let kp = KineticParams::default();
        let g = Grid1D::unit(16).unwrap();
        let s = State::new(0.0, Field::constant(g, 1.0), Field::constant(g, 1.0)).unwrap();
        let dt = 1e-3;
        let cfg = StepperConfig { scheme: Scheme::FullyImplicit, ..StepperConfig::default() };
        let out = step(&s, dt, &kp, &RegParams::default(), ModelKind::Limit, &cfg).unwrap();
        assert!(out.accepted);
        // oracle: 2x2 Newton on x - 1 - dt f(x) = 0, f = (u(1-u+v), v(1-v-u))
        let (mut a, mut b) = (1.0f64, 1.0f64);
        for _ in 0..50 {
            let r1 = a - 1.0 - dt * a * (1.0 - a + b);
            let r2 = b - 1.0 - dt * b * (1.0 - b - a);
            let j11 = 1.0 - dt * (1.0 - 2.0 * a + b);
            let j12 = -dt * a;
            let j21 = dt * b;
            let j22 = 1.0 - dt * (1.0 - 2.0 * b - a);
            let det = j11 * j22 - j12 * j21;
            a -= (j22 * r1 - j12 * r2) / det;
            b -= (-j21 * r1 + j11 * r2) / det;
        }
        for &x in out.state.u.values() {
            assert!((x - a).abs() < 1e-12);
        }
        for &x in out.state.v.values() {
            assert!((x - b).abs() < 1e-12);
        }
        let x = out.state.u.values()[0];
        let y = out.state.v.values()[0];
        assert!((x - 1.0 - dt * x * (1.0 - x + y)).abs() < 1e-10);
        assert!(x > 1.0);
    }

    #[test]
    fn imex_and_implicit_agree_for_small_steps() {
        let kp = coexistence_params();
        let rp = RegParams { eps: 1e-3, ..RegParams::default() };
        let s = smooth_state(48);
        let dt = 1e-5;
        for kind in [ModelKind::Limit, ModelKind::Regularized] {
            let a = step(&s, dt, &kp, &rp, kind, &StepperConfig::fixed(dt, Scheme::Imex)).unwrap();
            let b = step(&s, dt, &kp, &rp, kind, &StepperConfig::fixed(dt, Scheme::FullyImplicit)).unwrap();
            assert!(a.accepted && b.accepted);
            let d = a
                .state
                .u
                .values()
                .iter()
                .zip(b.state.u.values())
                .chain(a.state.v.values().iter().zip(b.state.v.values()))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-7, "{kind:?}: {d}");
        }
    }

    #[test]
    fn fd_jacobian_newton_agrees_with_frozen() {
        let kp = KineticParams { chi1: 0.3, chi2: 0.2, ..coexistence_params() };
        let rp = RegParams { eps: 1e-2, ..RegParams::default() };
        let s = smooth_state(24);
        let dt = 2e-3;
        let frozen = StepperConfig::fixed(dt, Scheme::FullyImplicit);
        let fd = StepperConfig { fd_jacobian: true, ..frozen };
        let a = step(&s, dt, &kp, &rp, ModelKind::Regularized, &frozen).unwrap();
        let b = step(&s, dt, &kp, &rp, ModelKind::Regularized, &fd).unwrap();
        assert!(a.accepted && b.accepted);
        assert!(b.newton_iters <= a.newton_iters);
        for (x, y) in a.state.u.values().iter().zip(b.state.u.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn implicit_step_mass_identity() {
        let kp = coexistence_params();
        let rp = RegParams { eps: 1e-3, ..RegParams::default() };
        let s = smooth_state(64);
        let dt = 1e-2;
        let cfg = StepperConfig { scheme: Scheme::FullyImplicit, dt_max: dt, ..StepperConfig::default() };
        let out = step(&s, dt, &kp, &rp, ModelKind::Regularized, &cfg).unwrap();
        assert!(out.accepted);
        let new = &out.state;
        let growth = (integrate(&new.u) - integrate(&s.u)) / dt;
        let react = new.grid().dx()
            * new
                .u
                .values()
                .iter()
                .zip(new.v.values())
                .map(|(&u, &v)| g_eps(u, rp.eps) * (kp.lambda1 - u + kp.a1 * v))
                .sum::<f64>();
        assert!((growth - react).abs() < cfg.newton_tol * 64.0, "{}", (growth - react).abs());
    }

    #[test]
    fn rejects_negative_candidates() {
        // explicit reactions overshoot far below zero with this step
        let kp = coexistence_params();
        let g = Grid1D::unit(16).unwrap();
        let s = State::new(0.0, Field::constant(g, 3.0), Field::constant(g, 0.1)).unwrap();
        let cfg = StepperConfig { dt_min: 10.0, dt_init: 10.0, dt_max: 10.0, ..StepperConfig::default() };
        let out = step(&s, 10.0, &kp, &RegParams::default(), ModelKind::Limit, &cfg).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.state, s);
        let err = run_until(s, 100.0, &kp, &RegParams::default(), ModelKind::Limit, &cfg, 1.0, |_| {});
        match err {
            Err(Error::Run(f)) => {
                assert_eq!(f.samples.len(), 1);
                assert_eq!(f.last_state.t, 0.0);
            }
            other => panic!("expected hard failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_length_run_records_one_sample() {
        let s = smooth_state(16);
        let mut calls = 0;
        let out = run_until(
            s.clone(),
            0.0,
            &KineticParams::default(),
            &RegParams::default(),
            ModelKind::Regularized,
            &StepperConfig::default(),
            0.1,
            |_| calls += 1,
        )
        .unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(calls, 1);
        assert_eq!(out.final_state, s);
        assert_eq!(out.stats.accepted, 0);
    }

    #[test]
    fn samples_follow_sample_times() {
        let s = smooth_state(16);
        let out = run_until(
            s,
            1.0,
            &coexistence_params(),
            &RegParams::default(),
            ModelKind::Regularized,
            &StepperConfig::default(),
            0.1,
            |_| {},
        )
        .unwrap();
        assert_eq!(out.final_state.t, 1.0);
        let times: Vec<f64> = out.samples.iter().map(|s| s.t).collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*times.last().unwrap(), 1.0);
        for k in 1..10 {
            let target = 0.1 * k as f64;
            let first_after = times.iter().copied().find(|&t| t >= target - 1e-10).unwrap();
            assert!(first_after - target <= StepperConfig::default().dt_max + 1e-12);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            run_until(
                smooth_state(32),
                0.5,
                &coexistence_params(),
                &RegParams::default(),
                ModelKind::Regularized,
                &StepperConfig::default(),
                0.05,
                |_| {},
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn temporal_convergence_is_first_order() {
        let kp = coexistence_params();
        let rp = RegParams { eps: 1e-2, ..RegParams::default() };
        let s = smooth_state(32);
        let t_end = 0.1;
        for scheme in [Scheme::Imex, Scheme::FullyImplicit] {
            for kind in [ModelKind::Limit, ModelKind::Regularized] {
                let solve = |dt: f64| {
                    run_until(s.clone(), t_end, &kp, &rp, kind, &StepperConfig::fixed(dt, scheme), 1.0, |_| {})
                        .unwrap()
                        .final_state
                };
                let reference = solve(1e-5);
                let err = |dt: f64| {
                    let st = solve(dt);
                    st.u
                        .values()
                        .iter()
                        .zip(reference.u.values())
                        .chain(st.v.values().iter().zip(reference.v.values()))
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                };
                let (e1, e2, e3) = (err(2e-3), err(1e-3), err(5e-4));
                let (r1, r2) = (e1 / e2, e2 / e3);
                assert!((1.6..2.5).contains(&r1) && (1.6..2.5).contains(&r2), "{scheme:?} {kind:?}: {r1} {r2}");
            }
        }
    }
}
