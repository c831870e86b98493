//! Model parameters, the nonlinear coefficient functions of the thin-film
//! regularization, and conservative right-hand side assembly.
//!
//! Every transport term is written as the divergence of a face flux
//!
//! ```text
//! F = -fourth · w_xxx + second · w_x + taxis · z_x
//! ```
//!
//! where `w` is the equation's own density, `z` the partner density and the
//! three coefficients are arithmetic face means of cell values. Reactions are
//! pointwise at cell centers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{divergence_unchecked, face_gradient, face_mean, face_third, Field, Grid1D};

/// Diffusivities, taxis sensitivities and Lotka–Volterra constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    pub d1: f64,
    pub d2: f64,
    /// Attractive taxis of predators up prey gradients.
    pub chi1: f64,
    /// Repulsive taxis of prey down predator gradients.
    pub chi2: f64,
    pub a1: f64,
    pub a2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for KineticParams {
    fn default() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            chi1: 0.05,
            chi2: 0.05,
            a1: 1.0,
            a2: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl KineticParams {
    /// All constants must be positive, except that the taxis pair may be
    /// switched off together (`χ₁ = χ₂ = 0`) for reaction–diffusion
    /// comparison runs.
    pub fn validate(&self) -> Result<()> {
        if self.chi1 == 0.0 && self.chi2 == 0.0 {
            return self.validate_named(&[]);
        }
        self.validate_named(&[("model.chi1", self.chi1), ("model.chi2", self.chi2)])
    }

    fn validate_named(&self, taxis: &[(&'static str, f64)]) -> Result<()> {
        let named = [
            ("model.d1", self.d1),
            ("model.d2", self.d2),
            ("model.a1", self.a1),
            ("model.a2", self.a2),
            ("model.lambda1", self.lambda1),
            ("model.lambda2", self.lambda2),
        ];
        for &(name, value) in taxis.iter().chain(&named) {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        Ok(())
    }

    /// ρ = χ₁/χ₂, the weight of the prey part of the quasi-entropy; 1 when
    /// taxis is switched off.
    pub fn chi_ratio(&self) -> f64 {
        if self.chi2 == 0.0 {
            1.0
        } else {
            self.chi1 / self.chi2
        }
    }

    /// A = a₁/a₂, the weight of the prey part of the regime entropies.
    pub fn a_ratio(&self) -> f64 {
        self.a1 / self.a2
    }
}

/// Regularization constants: ε, the fast-diffusion exponent α and the
/// thin-film degeneracy exponents n₁, n₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegParams {
    pub eps: f64,
    pub alpha: f64,
    pub n1: f64,
    pub n2: f64,
}

impl Default for RegParams {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            alpha: 0.5,
            n1: 2.0,
            n2: 2.0,
        }
    }
}

impl RegParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter {
                name: "reg.eps",
                value: self.eps,
                reason: "must lie in (0, 1)",
            });
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidParameter {
                name: "reg.alpha",
                value: self.alpha,
                reason: "must lie in (0, 1/2]",
            });
        }
        for (name, value) in [("reg.n1", self.n1), ("reg.n2", self.n2)] {
            if !(1.0..=2.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must lie in [1, 2]",
                });
            }
        }
        Ok(())
    }

    /// The ε that enters functionals for a given model: zero for the limit
    /// system, so the regularizing summands drop out.
    pub fn eps_for(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::Limit => 0.0,
            ModelKind::Regularized => self.eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// The second-order cross-diffusion system.
    Limit,
    /// The fourth-order thin-film regularization.
    Regularized,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "limit" => Ok(ModelKind::Limit),
            "regularized" => Ok(ModelKind::Regularized),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Predator density `u` and prey density `v` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

impl State {
    pub fn new(t: f64, u: Field, v: Field) -> Result<Self> {
        let s = Self { t, u, v };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.u.grid() != self.v.grid() {
            return Err(Error::GridMismatch);
        }
        let (min_u, min_v) = (self.u.min(), self.v.min());
        if !(min_u > 0.0 && min_v > 0.0) {
            return Err(Error::NonPositiveState { min_u, min_v });
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid1D {
        self.u.grid()
    }
}

/// g_ε(s) = 3s³/(3s² + ε), the mollified kinetic prefactor.
pub fn g_mollifier(s: f64, eps: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::Domain {
            func: "g_mollifier",
            value: s,
        });
    }
    Ok(g_eps(s, eps))
}

#[inline]
pub(crate) fn g_eps(s: f64, eps: f64) -> f64 {
    let s2 = s * s;
    3.0 * s2 * s / (3.0 * s2 + eps)
}

#[inline]
pub(crate) fn g_eps_prime(s: f64, eps: f64) -> f64 {
    let s2 = s * s;
    let d = 3.0 * s2 + eps;
    9.0 * s2 * (s2 + eps) / (d * d)
}

fn check_hflux_args(func: &'static str, s: f64, n: f64, eps: f64) -> Result<()> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::Domain { func, value: s });
    }
    if !(0.0..=3.5).contains(&n) {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n,
            reason: "must lie in [0, 7/2]",
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must be positive",
        });
    }
    Ok(())
}

/// h_ε(s) = s^{5-n}/(s^{4-n} + ε), the regularized taxis coefficient.
pub fn h_flux(s: f64, n: f64, eps: f64) -> Result<f64> {
    check_hflux_args("h_flux", s, n, eps)?;
    Ok(h_eps(s, n, eps))
}

/// h_ε'(s) = (s^{8-2n} + (5-n) ε s^{4-n}) / (s^{4-n} + ε)².
pub fn h_flux_prime(s: f64, n: f64, eps: f64) -> Result<f64> {
    check_hflux_args("h_flux_prime", s, n, eps)?;
    let a = s.powf(4.0 - n);
    let d = a + eps;
    Ok((a * a + (5.0 - n) * eps * a) / (d * d))
}

/// h_ε''(s) = (-(3-n)(4-n) ε s^{7-2n} + (4-n)(5-n) ε² s^{3-n}) / (s^{4-n} + ε)³,
/// defined for `s > 0`.
pub fn h_flux_second(s: f64, n: f64, eps: f64) -> Result<f64> {
    check_hflux_args("h_flux_second", s, n, eps)?;
    if s == 0.0 {
        return Err(Error::Domain {
            func: "h_flux_second",
            value: s,
        });
    }
    let a = s.powf(4.0 - n);
    let d = a + eps;
    let num = -(3.0 - n) * (4.0 - n) * eps * s.powf(7.0 - 2.0 * n)
        + (4.0 - n) * (5.0 - n) * eps * eps * s.powf(3.0 - n);
    Ok(num / (d * d * d))
}

#[inline]
pub(crate) fn h_eps(s: f64, n: f64, eps: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let a = s.powf(4.0 - n);
    s * (a / (a + eps))
}

/// Thin-film mobility s⁴/(s^{4-n} + ε).
pub fn m4_mobility(s: f64, n: f64, eps: f64) -> Result<f64> {
    if s < 0.0 || s.is_nan() {
        return Err(Error::Domain {
            func: "m4_mobility",
            value: s,
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must be positive",
        });
    }
    Ok(m4(s, n, eps))
}

#[inline]
pub(crate) fn m4(s: f64, n: f64, eps: f64) -> f64 {
    let s2 = s * s;
    s2 * s2 / (s.powf(4.0 - n) + eps)
}

/// Fast-diffusion coefficient ε^{α/2} s^{-α}.
pub fn fast_diffusion_coeff(s: f64, alpha: f64, eps: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain {
            func: "fast_diffusion_coeff",
            value: s,
        });
    }
    Ok(eps.powf(0.5 * alpha) * s.powf(-alpha))
}

/// Face coefficients of one equation's flux.
#[derive(Debug, Clone)]
pub(crate) struct FluxCoefficients {
    /// Multiplies `-w_xxx` (already includes ε).
    pub fourth: Vec<f64>,
    /// Multiplies `w_x` (diffusivity plus fast diffusion).
    pub second: Vec<f64>,
    /// Multiplies the partner gradient `z_x`, sign included.
    pub taxis: Vec<f64>,
}

impl FluxCoefficients {
    /// Face flux from precomputed face derivatives.
    #[inline]
    pub fn flux(&self, j: usize, own_x: f64, own_xxx: f64, other_x: f64) -> f64 {
        -self.fourth[j] * own_xxx + self.second[j] * own_x + self.taxis[j] * other_x
    }
}

/// Which of the two equations a coefficient set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Species {
    Predator,
    Prey,
}

pub(crate) fn flux_coefficients(
    own: &[f64],
    species: Species,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> FluxCoefficients {
    let (diffusivity, signed_chi, n) = match species {
        Species::Predator => (kp.d1, -kp.chi1, rp.n1),
        Species::Prey => (kp.d2, kp.chi2, rp.n2),
    };
    let nf = own.len() + 1;
    match kind {
        ModelKind::Limit => FluxCoefficients {
            fourth: vec![0.0; nf],
            second: {
                let mut s = vec![diffusivity; nf];
                s[0] = 0.0;
                s[nf - 1] = 0.0;
                s
            },
            taxis: face_mean(own).into_iter().map(|m| signed_chi * m).collect(),
        },
        ModelKind::Regularized => {
            let eps = rp.eps;
            let fast_scale = eps.powf(0.5 * rp.alpha);
            let mob: Vec<f64> = own.iter().map(|&s| m4(s, n, eps)).collect();
            let fast: Vec<f64> = own
                .iter()
                .map(|&s| fast_scale * s.powf(-rp.alpha))
                .collect();
            let h: Vec<f64> = own.iter().map(|&s| h_eps(s, n, eps)).collect();
            let mut second: Vec<f64> = face_mean(&fast).into_iter().map(|f| f + diffusivity).collect();
            second[0] = 0.0;
            second[nf - 1] = 0.0;
            FluxCoefficients {
                fourth: face_mean(&mob).into_iter().map(|m| eps * m).collect(),
                second,
                taxis: face_mean(&h).into_iter().map(|m| signed_chi * m).collect(),
            }
        }
    }
}

/// Reaction terms at one cell, `(R_u, R_v)`.
#[inline]
pub(crate) fn reactions(
    u: f64,
    v: f64,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> (f64, f64) {
    let (gu, gv) = match kind {
        ModelKind::Limit => (u, v),
        ModelKind::Regularized => (g_eps(u, rp.eps), g_eps(v, rp.eps)),
    };
    (
        gu * (kp.lambda1 - u + kp.a1 * v),
        gv * (kp.lambda2 - v - kp.a2 * u),
    )
}

/// Partial derivatives `[[∂R_u/∂u, ∂R_u/∂v], [∂R_v/∂u, ∂R_v/∂v]]`.
#[inline]
pub(crate) fn reaction_jacobian(
    u: f64,
    v: f64,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> [[f64; 2]; 2] {
    let (gu, dgu, gv, dgv) = match kind {
        ModelKind::Limit => (u, 1.0, v, 1.0),
        ModelKind::Regularized => (
            g_eps(u, rp.eps),
            g_eps_prime(u, rp.eps),
            g_eps(v, rp.eps),
            g_eps_prime(v, rp.eps),
        ),
    };
    let bu = kp.lambda1 - u + kp.a1 * v;
    let bv = kp.lambda2 - v - kp.a2 * u;
    [
        [dgu * bu - gu, kp.a1 * gu],
        [-kp.a2 * gv, dgv * bv - gv],
    ]
}

/// Face fluxes of both equations, boundary faces zero.
pub(crate) fn face_fluxes(
    u: &[f64],
    v: &[f64],
    grid: &Grid1D,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> (Vec<f64>, Vec<f64>) {
    let dx = grid.dx();
    let cu = flux_coefficients(u, Species::Predator, kp, rp, kind);
    let cv = flux_coefficients(v, Species::Prey, kp, rp, kind);
    let ux = face_gradient(u, dx);
    let vx = face_gradient(v, dx);
    let (uxxx, vxxx) = match kind {
        ModelKind::Limit => (vec![0.0; u.len() + 1], vec![0.0; v.len() + 1]),
        ModelKind::Regularized => (face_third(u, grid), face_third(v, grid)),
    };
    let n = u.len();
    let mut fu = vec![0.0; n + 1];
    let mut fv = vec![0.0; n + 1];
    for j in 1..n {
        fu[j] = cu.flux(j, ux[j], uxxx[j], vx[j]);
        fv[j] = cv.flux(j, vx[j], vxxx[j], ux[j]);
    }
    (fu, fv)
}

fn check_rhs_inputs(state: &State, kp: &KineticParams, rp: &RegParams, kind: ModelKind) -> Result<()> {
    state.check()?;
    kp.validate()?;
    if kind == ModelKind::Regularized {
        rp.validate()?;
    }
    Ok(())
}

/// Time derivatives `(u_t, v_t)` of either system at `state`.
pub fn assemble_rhs(
    state: &State,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> Result<(Field, Field)> {
    check_rhs_inputs(state, kp, rp, kind)?;
    Ok(rhs_unchecked(state.u.values(), state.v.values(), state.grid(), kp, rp, kind))
}

pub(crate) fn rhs_unchecked(
    u: &[f64],
    v: &[f64],
    grid: &Grid1D,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> (Field, Field) {
    let (fu, fv) = face_fluxes(u, v, grid, kp, rp, kind);
    let du = divergence_unchecked(&fu, grid);
    let dv = divergence_unchecked(&fv, grid);
    let mut du = du.into_values();
    let mut dv = dv.into_values();
    for i in 0..u.len() {
        let (ru, rv) = reactions(u[i], v[i], kp, rp, kind);
        du[i] += ru;
        dv[i] += rv;
    }
    (
        Field::from_vec_unchecked(*grid, du),
        Field::from_vec_unchecked(*grid, dv),
    )
}

/// Reaction parts alone, as fields.
pub fn reaction_fields(
    state: &State,
    kp: &KineticParams,
    rp: &RegParams,
    kind: ModelKind,
) -> Result<(Field, Field)> {
    check_rhs_inputs(state, kp, rp, kind)?;
    let (ru, rv): (Vec<f64>, Vec<f64>) = state
        .u
        .values()
        .iter()
        .zip(state.v.values())
        .map(|(&u, &v)| reactions(u, v, kp, rp, kind))
        .unzip();
    Ok((
        Field::from_vec_unchecked(*state.grid(), ru),
        Field::from_vec_unchecked(*state.grid(), rv),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn smooth_state(n: usize) -> State {
        let g = Grid1D::unit(n).unwrap();
        State::new(
            0.0,
            Field::from_fn(g, |x| 1.5 + 0.3 * (PI * x).cos() + 0.1 * (3.0 * PI * x).cos()),
            Field::from_fn(g, |x| 0.5 + 0.2 * (2.0 * PI * x).cos()),
        )
        .unwrap()
    }

    #[test]
    fn mollifier_examples() {
        assert_eq!(g_mollifier(0.0, 0.1).unwrap(), 0.0);
        assert_eq!(g_mollifier(1.0, 1.0).unwrap(), 0.75);
        assert!(g_mollifier(-1e-3, 0.1).is_err());
    }

    #[test]
    fn mollifier_gap_maximum() {
        // s - g_ε(s) = εs/(3s² + ε) peaks at s = √(ε/3) with value √ε/(2√3)
        for eps in [1e-4, 1e-2, 0.3] {
            let s0 = (eps / 3.0f64).sqrt();
            let peak = s0 - g_eps(s0, eps);
            assert_relative_eq!(peak, eps.sqrt() / (2.0 * 3f64.sqrt()), max_relative = 1e-12);
            for k in 1..2000 {
                let s = s0 * (k as f64 / 400.0);
                assert!(s - g_eps(s, eps) <= peak * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn mollifier_bounds_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let s: f64 = 10f64.powf(rng.gen_range(-6.0..3.0));
            let eps: f64 = 10f64.powf(rng.gen_range(-8.0..-0.01));
            let g = g_eps(s, eps);
            assert!((0.0..=s).contains(&g));
            assert!(s - g <= eps.sqrt() / (2.0 * 3f64.sqrt()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn hflux_examples() {
        assert_eq!(h_flux(0.0, 2.0, 0.5).unwrap(), 0.0);
        assert_eq!(h_flux(1.0, 2.0, 1.0).unwrap(), 0.5);
        assert!(h_flux(-1.0, 2.0, 0.5).is_err());
        assert!(h_flux(1.0, 3.6, 0.5).is_err());
        assert!(h_flux_second(0.0, 2.0, 0.5).is_err());
        assert!(h_flux_second(1e-3, 2.0, 0.5).is_ok());
    }

    #[test]
    fn hflux_bounds_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let s: f64 = 10f64.powf(rng.gen_range(-5.0..3.0));
            let n: f64 = rng.gen_range(0.0..=3.5);
            let eps: f64 = 10f64.powf(rng.gen_range(-6.0..0.0));
            let h = h_flux(s, n, eps).unwrap();
            let hp = h_flux_prime(s, n, eps).unwrap();
            assert!((0.0..=s).contains(&h), "h = {h}, s = {s}");
            assert!((0.0..=5.0 - n).contains(&hp), "h' = {hp}, n = {n}");
        }
    }

    #[test]
    fn hflux_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let step = 1e-5;
        for _ in 0..2000 {
            let s: f64 = rng.gen_range(0.1..10.0);
            let n: f64 = rng.gen_range(0.0..=3.5);
            let eps: f64 = rng.gen_range(0.01..1.0);
            let h = |x: f64| h_flux(x, n, eps).unwrap();
            let hp = |x: f64| h_flux_prime(x, n, eps).unwrap();
            let fd1 = (h(s + step) - h(s - step)) / (2.0 * step);
            let fd2 = (hp(s + step) - hp(s - step)) / (2.0 * step);
            let a1 = hp(s);
            let a2 = h_flux_second(s, n, eps).unwrap();
            assert!((a1 - fd1).abs() <= 1e-6 * a1.abs().max(1e-3), "h' {a1} vs {fd1}");
            assert!((a2 - fd2).abs() <= 1e-6 * a2.abs().max(1e-3), "h'' {a2} vs {fd2}");
        }
    }

    #[test]
    fn mobility_examples_and_bound() {
        assert_eq!(m4_mobility(0.0, 2.0, 0.1).unwrap(), 0.0);
        assert_eq!(m4_mobility(1.0, 2.0, 1.0).unwrap(), 0.5);
        assert!(m4_mobility(-0.5, 2.0, 0.1).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10_000 {
            let s: f64 = 10f64.powf(rng.gen_range(-4.0..3.0));
            let n: f64 = rng.gen_range(1.0..=2.0);
            let eps: f64 = 10f64.powf(rng.gen_range(-6.0..0.0));
            assert!(m4_mobility(s, n, eps).unwrap() <= s.powf(n) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn fast_diffusion_examples() {
        assert_relative_eq!(
            fast_diffusion_coeff(1.0, 0.5, 1e-4).unwrap(),
            1e-4f64.powf(0.25),
            max_relative = 1e-15
        );
        assert_relative_eq!(fast_diffusion_coeff(4.0, 0.5, 1e-4).unwrap(), 0.05, max_relative = 1e-14);
        assert!(fast_diffusion_coeff(0.0, 0.5, 1e-4).is_err());
        let vals: Vec<f64> = (1..200)
            .map(|k| fast_diffusion_coeff(k as f64 * 0.05, 0.3, 0.01).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn params_validate() {
        let mut kp = KineticParams::default();
        kp.validate().unwrap();
        kp.chi1 = -1.0;
        assert!(matches!(
            kp.validate(),
            Err(Error::InvalidParameter { name: "model.chi1", .. })
        ));
        KineticParams { chi1: 0.0, chi2: 0.0, ..KineticParams::default() }.validate().unwrap();
        assert!(KineticParams { chi2: 0.0, ..KineticParams::default() }.validate().is_err());
        let mut rp = RegParams::default();
        rp.validate().unwrap();
        rp.alpha = 0.6;
        assert!(rp.validate().is_err());
        rp = RegParams { n2: 0.5, ..RegParams::default() };
        assert!(rp.validate().is_err());
    }

    #[test]
    fn state_rejects_nonpositive_and_mismatch() {
        let g = Grid1D::unit(8).unwrap();
        let h = Grid1D::unit(9).unwrap();
        assert!(State::new(0.0, Field::constant(g, 1.0), Field::constant(g, 0.0)).is_err());
        assert!(matches!(
            State::new(0.0, Field::constant(g, 1.0), Field::constant(h, 1.0)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn homogeneous_steady_state_has_zero_rhs() {
        let kp = KineticParams {
            lambda1: 1.0,
            lambda2: 2.0,
            ..KineticParams::default()
        };
        let rp = RegParams::default();
        let g = Grid1D::unit(32).unwrap();
        let s = State::new(0.0, Field::constant(g, 1.5), Field::constant(g, 0.5)).unwrap();
        for kind in [ModelKind::Limit, ModelKind::Regularized] {
            let (du, dv) = assemble_rhs(&s, &kp, &rp, kind).unwrap();
            assert!(du.sup_norm() == 0.0 && dv.sup_norm() == 0.0, "{kind:?}");
        }
    }

    #[test]
    fn homogeneous_limit_reduces_to_ode() {
        let kp = KineticParams::default();
        let g = Grid1D::unit(16).unwrap();
        let (c1, c2) = (0.7, 1.9);
        let s = State::new(0.0, Field::constant(g, c1), Field::constant(g, c2)).unwrap();
        let (du, dv) = assemble_rhs(&s, &kp, &RegParams::default(), ModelKind::Limit).unwrap();
        let eu = c1 * (kp.lambda1 - c1 + kp.a1 * c2);
        let ev = c2 * (kp.lambda2 - c2 - kp.a2 * c1);
        assert!(du.values().iter().all(|&x| x == eu));
        assert!(dv.values().iter().all(|&x| x == ev));
    }

    #[test]
    fn rhs_mass_identity() {
        let kp = KineticParams { chi1: 0.7, chi2: 0.4, ..KineticParams::default() };
        let rp = RegParams { eps: 0.05, ..RegParams::default() };
        let s = smooth_state(64);
        for kind in [ModelKind::Limit, ModelKind::Regularized] {
            let (du, dv) = assemble_rhs(&s, &kp, &rp, kind).unwrap();
            let (ru, rv) = reaction_fields(&s, &kp, &rp, kind).unwrap();
            let (fu, fv) = face_fluxes(s.u.values(), s.v.values(), s.grid(), &kp, &rp, kind);
            let scale = fu.iter().chain(&fv).fold(0.0f64, |m, f| m.max(f.abs()));
            assert!((integrate(&du) - integrate(&ru)).abs() < 64.0 * f64::EPSILON * scale.max(1.0));
            assert!((integrate(&dv) - integrate(&rv)).abs() < 64.0 * f64::EPSILON * scale.max(1.0));
        }
    }

    #[test]
    fn regularized_rhs_approaches_limit() {
        // the fast-diffusion summand is O(ε^{α/2}); the mollifier and taxis
        // perturbations are O(√ε) and smaller; the fourth-order term is O(ε)
        // with a large constant, so start below ε = 1e-2
        let kp = KineticParams::default();
        let s = smooth_state(64);
        let (lu, lv) = assemble_rhs(&s, &kp, &RegParams::default(), ModelKind::Limit).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-4, 1e-6, 1e-8, 1e-10] {
            let rp = RegParams { eps, ..RegParams::default() };
            let (ru, rv) = assemble_rhs(&s, &kp, &rp, ModelKind::Regularized).unwrap();
            let interior = 4..60;
            let d = interior
                .map(|i| {
                    (ru.values()[i] - lu.values()[i])
                        .abs()
                        .max((rv.values()[i] - lv.values()[i]).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 60.0 * eps.powf(0.5 * rp.alpha), "eps = {eps}: {d}");
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn reaction_jacobian_matches_finite_differences() {
        let kp = KineticParams { lambda2: 2.0, a1: 1.3, a2: 0.7, ..KineticParams::default() };
        let rp = RegParams { eps: 0.03, ..RegParams::default() };
        let (u, v, h) = (0.4, 0.9, 1e-6);
        for kind in [ModelKind::Limit, ModelKind::Regularized] {
            let j = reaction_jacobian(u, v, &kp, &rp, kind);
            let r = |a, b| reactions(a, b, &kp, &rp, kind);
            let du = ((r(u + h, v).0 - r(u - h, v).0) / (2.0 * h), (r(u + h, v).1 - r(u - h, v).1) / (2.0 * h));
            let dv = ((r(u, v + h).0 - r(u, v - h).0) / (2.0 * h), (r(u, v + h).1 - r(u, v - h).1) / (2.0 * h));
            assert_relative_eq!(j[0][0], du.0, max_relative = 1e-7);
            assert_relative_eq!(j[1][0], du.1, max_relative = 1e-7);
            assert_relative_eq!(j[0][1], dv.0, max_relative = 1e-7);
            assert_relative_eq!(j[1][1], dv.1, max_relative = 1e-7);
        }
    }
}
