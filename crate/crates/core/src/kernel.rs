//! Transition generating functions.
//!
//! `F(t;s)` solves `∂F/∂t = f(F)`, `F(0;s) = s`. We integrate the complement
//! `R = 1 - F`, which obeys `R' = -f(1-R)` and decays like a power of `t`,
//! under pure relative error control.
//!
//! `ln 𝒫(t;s)` is available by two routes:
//! - space route: `∫_s^{F} g(u)/f(u) du`, taken along the path on which
//!   `v = -ln(1-u)` is linear. Writing `w = e^{-v} = 1-u` gives `du = w dv`,
//!   so the integrand is `(g/f)(1-w)·w` and the singular factor `w^{γ}` is
//!   evaluated at exact powers of `w`. The path stays inside the disc
//!   `|1-w| ≤ 1`, which is convex in `(ln|w|, arg w)`.
//! - time route: `∫_0^t g(F(u;s)) du`, integrated together with `R`.
//!
//! `𝒫_i = F^i 𝒫`. Coefficients `p_ij(t)` come from circle sampling, with one
//! ODE solve per sample point shared by all rows `i`.

use crate::inversion::{self, CoefficientSeries, InversionSettings};
use crate::laws::ModelSpec;
use crate::ode::{self, OdeSettings};
use crate::quad::{self, QuadSettings};
use crate::{Complex64, Error, Result};
use rayon::prelude::*;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSettings {
    pub ode: OdeSettings,
    /// Absolute tolerance on `ln 𝒫` in the time route.
    pub ln_p_abs_tol: f64,
    pub quad: QuadSettings,
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self {
            ode: OdeSettings::default(),
            ln_p_abs_tol: 1e-13,
            quad: QuadSettings::default().with_rel_tol(1e-12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    /// Integral of `g/f` between `s` and `F(t;s)`.
    #[default]
    Space,
    /// Integral of `g(F(u;s))` over `u ∈ [0,t]`.
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfValue {
    pub t: f64,
    pub s: Complex64,
    /// Initial population size; `p` and `ln_p` refer to `𝒫_i`.
    pub i: u32,
    pub f: Complex64,
    pub r: Complex64,
    pub p: Complex64,
    pub ln_p: Complex64,
    pub error_estimate: f64,
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn check_args(t: f64, s: Complex64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain { what: "t", value: t });
    }
    if !(s.norm() <= 1.0 + 1e-12) {
        return Err(Error::Domain {
            what: "|s|",
            value: s.norm(),
        });
    }
    Ok(())
}

/// `ln(1 - r)` without cancellation for small `r`.
pub fn ln_one_minus(r: Complex64) -> Complex64 {
    let (x, y) = (-r.re, -r.im);
    Complex64::new(0.5 * (x * (2.0 + x) + y * y).ln_1p(), y.atan2(1.0 + x))
}

/// `R(t;s)` and `F(t;s)`; `p` and `ln_p` are left at `1` and `0`.
pub fn solve_f(model: &ModelSpec, t: f64, s: Complex64, settings: &KernelSettings) -> Result<GfValue> {
    check_args(t, s)?;
    let r0 = one() - s;
    let mut out = GfValue {
        t,
        s,
        i: 0,
        f: s,
        r: r0,
        p: one(),
        ln_p: zero(),
        error_estimate: 0.0,
    };
    if t == 0.0 || r0.norm() == 0.0 {
        return Ok(out);
    }
    let sol = ode::integrate(|_, y: &[Complex64; 1]| [-model.f_complement(y[0])], 0.0, [r0], t, [0.0], &settings.ode)?;
    out.r = sol.y[0];
    out.f = one() - sol.y[0];
    out.error_estimate = sol.error_estimate * settings.ode.rel_tol * out.r.norm();
    Ok(out)
}

/// `∫ (g/f)(u) du` from `u = 1 - r0` to `u = 1 - r1` along the log path.
fn ratio_integral(model: &ModelSpec, r0: Complex64, r1: Complex64, quad: &QuadSettings) -> Result<quad::Quadrature<Complex64>> {
    let v0 = -r0.ln();
    let v1 = -r1.ln();
    let dv = v1 - v0;
    if dv.norm() == 0.0 {
        return Ok(quad::Quadrature {
            value: zero(),
            error: 0.0,
            evaluations: 0,
        });
    }
    Ok(quad::integrate(
        |x: f64| model.ratio_times_w((-(v0 + dv * x)).exp()) * dv,
        0.0,
        1.0,
        quad,
    )?)
}

fn finish(mut gf: GfValue, i: u32, ln_p: Complex64, err: f64) -> GfValue {
    let ln_f = ln_one_minus(gf.r);
    gf.i = i;
    gf.ln_p = ln_p + ln_f * i as f64;
    gf.p = gf.ln_p.exp();
    gf.error_estimate += err;
    gf
}

/// `𝒫(t;s)` by the space route.
pub fn compute_p(model: &ModelSpec, t: f64, s: Complex64, settings: &KernelSettings) -> Result<GfValue> {
    compute_p_i(model, 0, t, s, settings, Route::Space)
}

/// `𝒫_i(t;s) = F(t;s)^i 𝒫(t;s)` by either route.
pub fn compute_p_i(model: &ModelSpec, i: u32, t: f64, s: Complex64, settings: &KernelSettings, route: Route) -> Result<GfValue> {
    check_args(t, s)?;
    if t == 0.0 || (one() - s).norm() == 0.0 {
        let gf = solve_f(model, t, s, settings)?;
        return Ok(finish(gf, i, zero(), 0.0));
    }
    match route {
        Route::Space => {
            let gf = solve_f(model, t, s, settings)?;
            let q = ratio_integral(model, one() - s, gf.r, &settings.quad)?;
            Ok(finish(gf, i, q.value, q.error))
        }
        Route::Time => {
            let r0 = one() - s;
            let sol = ode::integrate(
                |_, y: &[Complex64; 2]| [-model.f_complement(y[0]), model.g_complement(y[0])],
                0.0,
                [r0, zero()],
                t,
                [0.0, settings.ln_p_abs_tol],
                &settings.ode,
            )?;
            let gf = GfValue {
                t,
                s,
                i: 0,
                f: one() - sol.y[0],
                r: sol.y[0],
                p: one(),
                ln_p: zero(),
                error_estimate: 0.0,
            };
            let err = sol.error_estimate * (settings.ln_p_abs_tol + settings.ode.rel_tol * sol.y[1].norm());
            Ok(finish(gf, i, sol.y[1], err))
        }
    }
}

/// Rows `p_ij(t)`, `i = 0..=i_max`, `j = 0..=j_out`, from shared circle samples.
pub fn transition_rows(
    model: &ModelSpec,
    i_max: u32,
    t: f64,
    j_out: usize,
    settings: &KernelSettings,
    inv: &InversionSettings,
) -> Result<Vec<CoefficientSeries>> {
    inv.check(j_out)?;
    let radius = inv.effective_radius(j_out);
    let points = inversion::half_circle(radius, inv.samples);
    let samples: Vec<(Complex64, Complex64)> = points
        .par_iter()
        .map(|&z| compute_p(model, t, z, settings).map(|gf| (gf.f, gf.p)))
        .collect::<Result<_>>()?;
    (0..=i_max)
        .into_par_iter()
        .map(|i| {
            let half: Vec<Complex64> = samples.iter().map(|(f, p)| f.powu(i) * p).collect();
            inversion::invert_half_samples(&half, radius, inv.samples, j_out, inv)
        })
        .collect()
}

/// Row `p_ij(t)`, `j = 0..=j_out`.
pub fn transition_probs(
    model: &ModelSpec,
    i: u32,
    t: f64,
    j_out: usize,
    settings: &KernelSettings,
    inv: &InversionSettings,
) -> Result<CoefficientSeries> {
    inversion::extract(|z| compute_p_i(model, i, t, z, settings, Route::Space).map(|gf| gf.p), j_out, inv)
}

/// `R(t;s) = [(1-s)^{-ν} + cνt]^{-1/ν}` for the unperturbed stable offspring law.
pub fn closed_form_r(nu: f64, c: f64, t: f64, s: f64) -> f64 {
    ((1.0 - s).powf(-nu) + c * nu * t).powf(-1.0 / nu)
}

pub const GF_TABLE_HEADER: &str = "t,s_re,s_im,F_re,F_im,P_re,P_im,err";
pub const ROW_TABLE_HEADER: &str = "t,i,j,p_ij,aliasing_bound";

pub fn gf_table(values: &[GfValue]) -> String {
    let mut out = String::from(GF_TABLE_HEADER);
    out.push('\n');
    for v in values {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            v.t, v.s.re, v.s.im, v.f.re, v.f.im, v.p.re, v.p.im, v.error_estimate
        );
    }
    out
}

pub fn row_table(t: f64, rows: &[CoefficientSeries]) -> String {
    let mut out = String::from(ROW_TABLE_HEADER);
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        for (j, p) in row.values.iter().enumerate() {
            let _ = writeln!(out, "{t:e},{i},{j},{p:e},{:e}", row.total_bound());
        }
    }
    out
}
