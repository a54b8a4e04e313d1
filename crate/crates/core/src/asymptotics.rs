//! Measured convergence rates and numerical checks of the auxiliary
//! asymptotic identities.
//!
//! Every error sequence is computed in log space: `e^{T(t)}𝒫(t;s)/π(s) - 1`
//! is `expm1(T(t) + ln 𝒫(t;s) - ln π(s))`, so nothing overflows however large
//! `T(t)` gets.

use crate::invariants;
use crate::kernel::{self, KernelSettings};
use crate::laws::ModelSpec;
use crate::quad::{self, QuadSettings};
use crate::rvcalc::{RvContext, SlowlyVaryingSpec};
use crate::{Complex64, Error, Result};
use rayon::prelude::*;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    /// The top `n` decades of the grid.
    TopDecades(f64),
    Full,
    Range(f64, f64),
}

impl Default for FitWindow {
    fn default() -> Self {
        Self::TopDecades(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub window: FitWindow,
    pub slope_tol: f64,
    pub r_squared_min: f64,
    /// Points whose error is within `10 × floor` are dropped from the fit.
    pub floor: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            window: FitWindow::default(),
            slope_tol: 0.1,
            r_squared_min: 0.99,
            floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub t_grid: Vec<f64>,
    pub errors: Vec<f64>,
    /// Indices of the points used in the regression.
    pub used: Vec<usize>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub r_squared: f64,
    pub predicted_slope: f64,
    pub slope_tol: f64,
    pub r_squared_min: f64,
    pub passed: bool,
}

impl RateFit {
    /// `slope_tol - |fitted - predicted|`; negative when the slope check fails.
    pub fn margin(&self) -> f64 {
        self.slope_tol - (self.fitted_slope - self.predicted_slope).abs()
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Least squares of `ln e` on `ln t` over the fit window.
pub fn fit_rate(t_grid: &[f64], errors: &[f64], predicted_slope: f64, settings: &FitSettings) -> Result<RateFit> {
    if t_grid.len() != errors.len() {
        return Err(Error::InvalidParameter("grid and error lengths differ".into()));
    }
    let t_max = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = match settings.window {
        FitWindow::TopDecades(n) => (t_max / 10f64.powf(n), t_max),
        FitWindow::Full => (f64::NEG_INFINITY, f64::INFINITY),
        FitWindow::Range(lo, hi) => (lo, hi),
    };
    let used: Vec<usize> = (0..t_grid.len())
        .filter(|&k| {
            let (t, e) = (t_grid[k], errors[k]);
            t > 0.0 && t >= lo * (1.0 - 1e-12) && t <= hi * (1.0 + 1e-12) && e.is_finite() && e > 10.0 * settings.floor
        })
        .collect();
    if used.len() < 3 {
        return Err(Error::InvalidParameter(format!("only {} usable points in the fit window", used.len())));
    }
    let n = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|&k| t_grid[k].ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&k| errors[k].ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    let passed = (slope - predicted_slope).abs() <= settings.slope_tol && r_squared >= settings.r_squared_min;
    Ok(RateFit {
        t_grid: t_grid.to_vec(),
        errors: errors.to_vec(),
        used,
        fitted_slope: slope,
        fitted_intercept: intercept,
        r_squared,
        predicted_slope,
        slope_tol: settings.slope_tol,
        r_squared_min: settings.r_squared_min,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub s: f64,
    pub fit: RateFit,
    /// `Δ(t;s)·K(τ(t))` with `Δ ≈ (1/γ) λ(t;s)^{-γ/ν}`.
    pub envelope: Vec<f64>,
    /// `e(t) / envelope(t)`.
    pub envelope_ratio: Vec<f64>,
    /// `e(t)·t^{γ/ν}`.
    pub compensated: Vec<f64>,
}

fn ln_p_real(model: &ModelSpec, t: f64, s: f64, settings: &KernelSettings) -> Result<f64> {
    Ok(kernel::compute_p(model, t, Complex64::new(s, 0.0), settings)?.ln_p.re)
}

/// `e(t) = |𝒫(t;s)/U(s) - 1|`; predicted slope `-γ/ν`.
pub fn rate_theorem1(model: &ModelSpec, s: f64, t_grid: &[f64], kernel_settings: &KernelSettings, fit: &FitSettings) -> Result<Theorem1Report> {
    model.require_positive_gamma()?;
    if !(0.0..=0.95).contains(&s) {
        return Err(Error::Domain { what: "s", value: s });
    }
    let ctx = RvContext::from_model(model);
    let (nu, gamma) = (ctx.nu, ctx.gamma());
    let ln_u = invariants::ln_u(model, Complex64::new(s, 0.0), &kernel_settings.quad)?.re;
    if ln_u < -700.0 {
        return Err(Error::NoConvergence(format!("U({s}) is below the floating-point floor")));
    }
    let errors: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| Ok((ln_p_real(model, t, s, kernel_settings)? - ln_u).exp_m1().abs()))
        .collect::<Result<_>>()?;
    let mut envelope = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let lam = ctx.lambda_shift(t, s)?.lambda;
        let k = if t > 0.0 { ctx.k_factor(ctx.tau(t)?) } else { f64::NAN };
        envelope.push(lam.powf(-gamma / nu) / gamma * k);
    }
    let envelope_ratio = errors.iter().zip(&envelope).map(|(e, v)| e / v).collect();
    let compensated = errors.iter().zip(t_grid).map(|(e, t)| e * t.powf(gamma / nu)).collect();
    Ok(Theorem1Report {
        s,
        fit: fit_rate(t_grid, &errors, -gamma / nu, fit)?,
        envelope,
        envelope_ratio,
        compensated,
    })
}

/// `ln[e^{T(t)}𝒫(t;s)/π(s)]`.
fn theorem2_log_ratio(model: &ModelSpec, ctx: &RvContext, t: f64, s: f64, ln_pi_s: f64, settings: &KernelSettings) -> Result<f64> {
    Ok(ctx.big_t(t)? + ln_p_real(model, t, s, settings)? - ln_pi_s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    pub fit: RateFit,
    /// `e^{T(t)}𝒫(t;s_0)` at the largest grid time.
    pub limit_value: f64,
    /// `π(s_0)`.
    pub pi_value: f64,
    /// `max_s ρ(t;s)/ρ(t;s_0)` per grid time.
    pub uniformity: Vec<f64>,
    /// Maximum of `uniformity` over the fit window.
    pub uniformity_max: f64,
}

/// `ρ(t;s) = |e^{T(t)}𝒫(t;s)/π(s) - 1|`; predicted slope `-μ/ν`.
///
/// The fit uses `s_grid[0]`; the remaining points enter the uniformity ratio.
pub fn rate_theorem2(model: &ModelSpec, s_grid: &[f64], t_grid: &[f64], kernel_settings: &KernelSettings, fit: &FitSettings) -> Result<Theorem2Report> {
    model.require_theorem2()?;
    if s_grid.is_empty() {
        return Err(Error::InvalidParameter("empty s grid".into()));
    }
    let ctx = RvContext::from_model(model);
    let ln_pis: Vec<f64> = s_grid
        .iter()
        .map(|&s| Ok(invariants::ln_pi(model, Complex64::new(s, 0.0), &kernel_settings.quad)?.re))
        .collect::<Result<_>>()?;
    let rho: Vec<Vec<f64>> = t_grid
        .par_iter()
        .map(|&t| {
            s_grid
                .iter()
                .zip(&ln_pis)
                .map(|(&s, &lp)| Ok(theorem2_log_ratio(model, &ctx, t, s, lp, kernel_settings)?.exp_m1().abs()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = rho.iter().map(|r| r[0]).collect();
    let fit = fit_rate(t_grid, &errors, -ctx.mu() / ctx.nu, fit)?;
    let uniformity: Vec<f64> = rho
        .iter()
        .map(|r| r.iter().map(|v| v / r[0]).fold(0.0, f64::max))
        .collect();
    let uniformity_max = fit.used.iter().map(|&k| uniformity[k]).fold(0.0, f64::max);
    let t_last = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let limit_value = (ctx.big_t(t_last)? + ln_p_real(model, t_last, s_grid[0], kernel_settings)?).exp();
    Ok(Theorem2Report {
        fit,
        limit_value,
        pi_value: ln_pis[0].exp(),
        uniformity,
        uniformity_max,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corollary1Report {
    pub fit: RateFit,
    /// `ℬ(0)` by quadrature of the regularized integrand.
    pub b0: f64,
    /// `π(0) = e·ℬ(0)`.
    pub pi0: f64,
    /// `e^{T(t)}p_00(t)` on the grid.
    pub scaled_p00: Vec<f64>,
}

/// `|e^{T(t)}p_00(t)/π(0) - 1|` with `p_00(t) = 𝒫(t;0)`.
pub fn rate_corollary1(model: &ModelSpec, t_grid: &[f64], kernel_settings: &KernelSettings, fit: &FitSettings) -> Result<Corollary1Report> {
    model.require_theorem2()?;
    let ctx = RvContext::from_model(model);
    let zero = Complex64::new(0.0, 0.0);
    let ln_b0 = invariants::ln_b(model, zero, &kernel_settings.quad)?.re;
    let ln_pi0 = 1.0 + ln_b0;
    let logs: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| Ok(ctx.big_t(t)? + ln_p_real(model, t, 0.0, kernel_settings)?))
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = logs.iter().map(|l| (l - ln_pi0).exp_m1().abs()).collect();
    Ok(Corollary1Report {
        fit: fit_rate(t_grid, &errors, -ctx.mu() / ctx.nu, fit)?,
        b0: ln_b0.exp(),
        pi0: ln_pi0.exp(),
        scaled_p00: logs.iter().map(|l| l.exp()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub x: f64,
    pub value: f64,
    pub reference: f64,
    /// The normalized quantity whose boundedness or decay is checked.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub name: &'static str,
    pub rows: Vec<LemmaRow>,
    pub sup_ratio: f64,
    pub bound: f64,
    pub passed: bool,
}

fn lemma_report(name: &'static str, rows: Vec<LemmaRow>, bound: f64, extra: bool) -> LemmaReport {
    let sup_ratio = rows.iter().map(|r| r.ratio).filter(|r| r.is_finite()).fold(0.0, f64::max);
    let finite = rows.iter().all(|r| r.ratio.is_finite() || r.ratio.is_nan());
    LemmaReport {
        name,
        passed: finite && sup_ratio <= bound && extra,
        rows,
        sup_ratio,
        bound,
    }
}

/// Relative deviation of `1/R(t;s)` from `((νt)^{1/ν}/𝒩(t))·[1 + 𝓜(s)/t]^{1/ν}`.
///
/// `x` of each row is `t`, `reference` is `s`. Passes when the deviation
/// decreases along the grid for every `s` and ends below `final_bound`.
pub fn check_lemma1(model: &ModelSpec, s_grid: &[f64], t_grid: &[f64], kernel_settings: &KernelSettings, final_bound: f64) -> Result<LemmaReport> {
    let ctx = RvContext::from_model(model);
    let nu = ctx.nu;
    let mut rows = Vec::new();
    let mut decreasing = true;
    for &s in s_grid {
        let m = ctx.m_gf(s)?;
        let devs: Vec<f64> = t_grid
            .par_iter()
            .map(|&t| {
                let r = kernel::solve_f(model, t, Complex64::new(s, 0.0), kernel_settings)?.r.re;
                let scale = (nu * t).powf(1.0 / nu) / ctx.script_n(t)? * (1.0 + m / t).powf(1.0 / nu);
                Ok((r * scale - 1.0).abs())
            })
            .collect::<Result<_>>()?;
        decreasing &= devs.windows(2).all(|w| w[1] <= w[0]);
        for (&t, &d) in t_grid.iter().zip(&devs) {
            rows.push(LemmaRow {
                x: t,
                value: d,
                reference: s,
                ratio: d,
            });
        }
    }
    let last_t = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let end_ok = rows.iter().filter(|r| r.x == last_t).all(|r| r.value <= final_bound);
    let mut report = lemma_report("lemma1", rows, f64::INFINITY, decreasing && end_ok);
    report.bound = final_bound;
    Ok(report)
}

/// `|1/Λ(R(t;s)) - 1/Λ(1-s) - νt| / ln ν(t;s)`, bounded by `bound`.
pub fn check_lemma2(model: &ModelSpec, s: f64, t_grid: &[f64], kernel_settings: &KernelSettings, bound: f64) -> Result<LemmaReport> {
    let ctx = RvContext::from_model(model);
    let base = 1.0 / ctx.lambda(1.0 - s)?;
    let rows: Vec<LemmaRow> = t_grid
        .par_iter()
        .map(|&t| {
            let r = kernel::solve_f(model, t, Complex64::new(s, 0.0), kernel_settings)?.r.re;
            let remainder = if t == 0.0 { 0.0 } else { (1.0 / ctx.lambda(r)? - base - ctx.nu * t).abs() };
            let log_nu = ctx.lambda_shift(t, s)?.nu_ts.ln();
            Ok(LemmaRow {
                x: t,
                value: remainder,
                reference: log_nu,
                ratio: if log_nu > 0.0 { remainder / log_nu } else { f64::NAN },
            })
        })
        .collect::<Result<_>>()?;
    Ok(lemma_report("lemma2", rows, bound, true))
}

/// `∫_t^∞ y^{-1-σ} L(y) dy` against `(1/σ) t^{-σ} L(t)`; reports
/// `|ratio - 1| / ϱ(t)` with `ϱ` the declared remainder of `L`.
///
/// The integral is truncated at `y = 10⁶ t` and the tail is taken from the
/// spec's monotone envelope; its half-width is added to the quadrature error.
pub fn check_lemma3(spec: &SlowlyVaryingSpec, sigma: f64, t_grid: &[f64], bound: f64) -> Result<LemmaReport> {
    if !(sigma > 0.0) {
        return Err(Error::Domain { what: "sigma", value: sigma });
    }
    let settings = QuadSettings::default().with_rel_tol(1e-13);
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let cut = t * 1e6;
        let body = quad::integrate(|v: f64| (-sigma * v).exp() * spec.eval(v.exp()), t.ln(), cut.ln(), &settings)?.value;
        let (lo, hi) = spec
            .tail_envelope(cut)
            .ok_or_else(|| Error::Precondition(format!("no tail envelope for {spec}")))?;
        let tail = 0.5 * (lo + hi) * cut.powf(-sigma) / sigma;
        let reference = t.powf(-sigma) * spec.eval(t) / sigma;
        let rho = spec
            .remainder(t)
            .ok_or_else(|| Error::Precondition(format!("{spec} declares no remainder")))?;
        let value = body + tail;
        rows.push(LemmaRow {
            x: t,
            value,
            reference,
            ratio: (value / reference - 1.0).abs() / rho,
        });
    }
    Ok(lemma_report("lemma3", rows, bound, true))
}

/// `𝓘(x) = ∫_x^1 g/f du` against `(1/γ) g(x)/Λ(1-x)`; reports
/// `|ratio - 1| / Λ(1-x)`.
pub fn check_lemma4(model: &ModelSpec, x_grid: &[f64], quad_settings: &QuadSettings, bound: f64) -> Result<LemmaReport> {
    model.require_positive_gamma()?;
    let ctx = RvContext::from_model(model);
    let rows: Vec<LemmaRow> = x_grid
        .par_iter()
        .map(|&x| {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::Domain { what: "x", value: x });
            }
            let integral = invariants::ln_u(model, Complex64::new(x, 0.0), quad_settings)?.re;
            let lam = ctx.lambda(1.0 - x)?;
            let g = model.g_complement(Complex64::new(1.0 - x, 0.0)).re;
            let reference = g / lam / ctx.gamma();
            Ok(LemmaRow {
                x,
                value: integral,
                reference,
                ratio: (integral / reference - 1.0).abs() / lam,
            })
        })
        .collect::<Result<_>>()?;
    Ok(lemma_report("lemma4", rows, bound, true))
}

/// `(t, error, predicted_envelope, ratio)`.
pub fn rate_table(fit: &RateFit, envelope: Option<&[f64]>) -> String {
    let mut out = String::from("t,error,predicted_envelope,ratio\n");
    for (k, (&t, &e)) in fit.t_grid.iter().zip(&fit.errors).enumerate() {
        let env = envelope.map_or_else(|| (fit.fitted_intercept + fit.predicted_slope * t.ln()).exp(), |v| v[k]);
        let _ = writeln!(out, "{t:e},{e:e},{env:e},{:e}", e / env);
    }
    out
}

pub fn lemma_table(report: &LemmaReport) -> String {
    let mut out = String::from("x,value,reference,ratio\n");
    for r in &report.rows {
        let _ = writeln!(out, "{:e},{:e},{:e},{:e}", r.x, r.value, r.reference, r.ratio);
    }
    out
}

/// `name slope -0.500 (predicted -0.500) PASS`.
pub fn summary_line(name: &str, fit: &RateFit) -> String {
    format!(
        "{name} slope {:.3} (predicted {:.3}) r2 {:.4} {}",
        fit.fitted_slope,
        fit.predicted_slope,
        fit.r_squared,
        fit.verdict()
    )
}
