//! Limit generating functions and invariant measures.
//!
//! For `γ > 0`, `ln U(s) = ∫_s^1 g/f du`. For `γ < 0`,
//! `ln π(s) = (1-s)^{-|γ|} + ln ℬ(s)` where `ℬ` integrates the regularized
//! integrand `g/f + |γ|(1-u)^{-1-|γ|}`. Both integrals run along the ray
//! `1 - u = (1-s) e^{-τ}`, `τ ∈ [0, ∞)`, on which `du = (1-u) dτ`.

use crate::inversion::{self, CoefficientSeries, InversionSettings};
use crate::kernel::{self, KernelSettings};
use crate::laws::ModelSpec;
use crate::quad::{self, QuadSettings};
use crate::{Complex64, Error, Result};
use std::fmt::Write as _;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn check_s(s: Complex64) -> Result<()> {
    if !(s.norm() <= 1.0 + 1e-12) {
        return Err(Error::Domain {
            what: "|s|",
            value: s.norm(),
        });
    }
    Ok(())
}

/// `∫ h(w) dτ` over `w = w0 e^{-τ}`, `τ ∈ [0, ∞)`.
fn ray_integral<H: Fn(Complex64) -> Complex64>(h: H, w0: Complex64, settings: &QuadSettings) -> Result<Complex64> {
    let q = quad::integrate_to_infinity(|tau: f64| h(w0 * (-tau).exp()), 0.0, settings)?;
    Ok(q.value)
}

/// `ln U(s)`; requires `γ > 0`.
pub fn ln_u(model: &ModelSpec, s: Complex64, settings: &QuadSettings) -> Result<Complex64> {
    model.require_positive_gamma()?;
    check_s(s)?;
    let w0 = one() - s;
    if w0.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    ray_integral(|w| model.ratio_times_w(w), w0, settings)
}

pub fn compute_u(model: &ModelSpec, s: Complex64, settings: &QuadSettings) -> Result<Complex64> {
    Ok(ln_u(model, s, settings)?.exp())
}

/// `ln ℬ(s)`; requires the Theorem-2 preconditions.
pub fn ln_b(model: &ModelSpec, s: Complex64, settings: &QuadSettings) -> Result<Complex64> {
    model.require_theorem2()?;
    check_s(s)?;
    let w0 = one() - s;
    if w0.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    ray_integral(|w| model.regularized_times_w(w), w0, settings)
}

pub fn compute_b(model: &ModelSpec, s: Complex64, settings: &QuadSettings) -> Result<Complex64> {
    Ok(ln_b(model, s, settings)?.exp())
}

/// `ln π(s) = (1-s)^{-|γ|} + ln ℬ(s)`, `s ≠ 1`.
pub fn ln_pi(model: &ModelSpec, s: Complex64, settings: &QuadSettings) -> Result<Complex64> {
    let lb = ln_b(model, s, settings)?;
    let w0 = one() - s;
    if w0.norm() == 0.0 {
        return Err(Error::Domain { what: "s", value: 1.0 });
    }
    Ok(w0.powf(-model.gamma().abs()) + lb)
}

pub fn compute_pi(model: &ModelSpec, s: Complex64, settings: &QuadSettings) -> Result<Complex64> {
    Ok(ln_pi(model, s, settings)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// Coefficients of `U`, a probability distribution.
    DistributionU,
    /// Coefficients of `π`, unnormalized.
    MeasurePi,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::DistributionU => "distribution_U",
            Self::MeasurePi => "measure_pi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    pub kind: MeasureKind,
    pub series: CoefficientSeries,
}

impl InvariantMeasure {
    pub fn values(&self) -> &[f64] {
        &self.series.values
    }

    /// Copy with `m_j` replaced.
    pub fn with_value(&self, j: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.series.values[j] = value;
        out
    }
}

pub fn extract_measure(
    model: &ModelSpec,
    kind: MeasureKind,
    j_out: usize,
    inv: &InversionSettings,
    quad: &QuadSettings,
) -> Result<InvariantMeasure> {
    let series = match kind {
        MeasureKind::DistributionU => {
            model.require_positive_gamma()?;
            inversion::extract(|z| compute_u(model, z, quad), j_out, inv)?
        }
        MeasureKind::MeasurePi => {
            model.require_theorem2()?;
            inversion::extract(|z| compute_pi(model, z, quad), j_out, inv)?
        }
    };
    Ok(InvariantMeasure { kind, series })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub tau: f64,
    /// `|Σ_{i≤J} m_i p_ij(τ) - m_j|` for `j ≤ J/2`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Inversion error carried by the measure and the rows.
    pub inversion_bound: f64,
    /// `(1 - Σ_{i≤J} m_i) · max_{j≤J/2} p_Jj(τ)`, for distributions only;
    /// an estimate of the rows `i > J` left out of the sum.
    pub tail_estimate: Option<f64>,
}

/// Residuals of `m_j = Σ_i m_i p_ij(τ)` from precomputed rows `p_i·(τ)`, `i = 0..=J`.
pub fn invariance_residuals(measure: &InvariantMeasure, rows: &[CoefficientSeries], tau: f64) -> Result<InvarianceReport> {
    let m = measure.values();
    let big_j = rows.len() - 1;
    if m.len() <= big_j || rows.iter().any(|r| r.values.len() <= big_j / 2) {
        return Err(Error::InvalidParameter(format!(
            "need m_0..m_{big_j} and rows of length > {}",
            big_j / 2
        )));
    }
    let half = big_j / 2;
    let residuals: Vec<f64> = (0..=half)
        .map(|j| {
            let pushed: f64 = (0..=big_j).map(|i| m[i] * rows[i].values[j]).sum();
            (pushed - m[j]).abs()
        })
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let inversion_bound = measure.series.total_bound()
        + (0..=big_j).map(|i| m[i] * rows[i].total_bound()).sum::<f64>()
        + measure.series.total_bound() * rows.iter().map(|r| r.sum()).fold(0.0, f64::max);
    let tail_estimate = match measure.kind {
        MeasureKind::DistributionU => {
            let mass: f64 = m[..=big_j].iter().sum();
            let edge = rows[big_j].values[..=half].iter().copied().fold(0.0, f64::max);
            Some((1.0 - mass).max(0.0) * edge)
        }
        MeasureKind::MeasurePi => None,
    };
    Ok(InvarianceReport {
        tau,
        residuals,
        max_residual,
        inversion_bound,
        tail_estimate,
    })
}

/// Compute rows `p_ij(τ)`, `i, j ≤ J`, and the invariance residuals.
pub fn check_invariance(
    measure: &InvariantMeasure,
    model: &ModelSpec,
    tau: f64,
    big_j: u32,
    kernel_settings: &KernelSettings,
    inv: &InversionSettings,
) -> Result<InvarianceReport> {
    let rows = kernel::transition_rows(model, big_j, tau, big_j as usize, kernel_settings, inv)?;
    invariance_residuals(measure, &rows, tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub t_grid: Vec<f64>,
    /// `υ_j(t)`, one vector of `j = 0..=j_max` per time.
    pub ratios: Vec<Vec<f64>>,
    /// `m_j/m_0` from the limit generating function.
    pub limits: Vec<f64>,
}

impl RatioTable {
    /// `|υ_j(t) - m_j/m_0|` along the grid.
    pub fn distances(&self, j: usize) -> Vec<f64> {
        self.ratios.iter().map(|r| (r[j] - self.limits[j]).abs()).collect()
    }

    /// Whether the distance to the limit decreases along the grid.
    pub fn stabilizes(&self, j: usize) -> bool {
        self.distances(j).windows(2).all(|w| w[1] <= w[0])
    }
}

/// `υ_j(t) = p_0j(t)/p_00(t)`, extracted as coefficients of `𝒫(t;s)/𝒫(t;0)`.
pub fn ratio_limits(
    model: &ModelSpec,
    j_max: usize,
    t_grid: &[f64],
    kernel_settings: &KernelSettings,
    inv: &InversionSettings,
) -> Result<RatioTable> {
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("t grid must be increasing".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut ratios = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let base = kernel::compute_p(model, t, zero, kernel_settings)?.ln_p;
        if base.re < -700.0 {
            return Err(Error::NoConvergence(format!("p_00({t}) = e^{} is below the floating-point floor", base.re)));
        }
        let series = inversion::extract(
            |z| kernel::compute_p(model, t, z, kernel_settings).map(|gf| (gf.ln_p - base).exp()),
            j_max,
            inv,
        )?;
        ratios.push(series.values);
    }
    let quad = kernel_settings.quad;
    let limits = if model.gamma() > 0.0 {
        let l0 = ln_u(model, zero, &quad)?;
        inversion::extract(|z| Ok((ln_u(model, z, &quad)? - l0).exp()), j_max, inv)?.values
    } else {
        let l0 = ln_pi(model, zero, &quad)?;
        inversion::extract(|z| Ok((ln_pi(model, z, &quad)? - l0).exp()), j_max, inv)?.values
    };
    Ok(RatioTable {
        t_grid: t_grid.to_vec(),
        ratios,
        limits,
    })
}

/// `(j, m_j, bound)` with a `#` header recording the model and extraction.
pub fn measure_table(measure: &InvariantMeasure, model: &ModelSpec) -> String {
    let s = &measure.series;
    let mut out = String::new();
    let _ = writeln!(out, "# kind={}", measure.kind.name());
    for section in model.to_sections() {
        for e in &section.entries {
            let _ = writeln!(out, "# {}.{}={}", section.name, e.key, e.value);
        }
    }
    let _ = writeln!(out, "# radius={} samples={} aliasing_bound={:e} roundoff_bound={:e} max_clamp={:e}", s.radius, s.samples, s.aliasing_bound, s.roundoff_bound, s.max_clamp);
    out.push_str("j,m_j,bound\n");
    for (j, v) in s.values.iter().enumerate() {
        let _ = writeln!(out, "{j},{v:e},{:e}", s.total_bound());
    }
    out
}

pub fn ratio_table_csv(table: &RatioTable) -> String {
    let mut out = String::from("t,j,upsilon,limit\n");
    for (t, row) in table.t_grid.iter().zip(&table.ratios) {
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(out, "{t:e},{j},{v:e},{:e}", table.limits[j]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn q() -> QuadSettings {
        QuadSettings::default().with_rel_tol(1e-12)
    }

    #[test]
    fn u_examples() {
        let m = ModelSpec::stable(0.5, 1.0, 0.75, 0.25).unwrap();
        assert_eq!(compute_u(&m, c(1.0), &q()).unwrap(), c(1.0));
        assert_relative_eq!(compute_u(&m, c(0.0), &q()).unwrap().re, (-1.0f64).exp(), max_relative = 1e-12);
        let u = compute_u(&m, c(0.5), &q()).unwrap().re;
        assert_relative_eq!(u, (-(0.5f64.powf(0.25))).exp(), max_relative = 1e-12);
        assert!((u - 0.431_323_7).abs() < 1e-7);
        let neg = ModelSpec::stable(0.75, 1.0, 0.5, 0.25).unwrap();
        assert!(compute_u(&neg, c(0.0), &q()).is_err());
    }

    #[test]
    fn b_and_pi_examples() {
        let m = ModelSpec::stable(0.75, 1.0, 0.5, 0.25).unwrap();
        for s in [0.0, 0.3, 0.9] {
            assert_eq!(compute_b(&m, c(s), &q()).unwrap(), c(1.0));
        }
        assert_relative_eq!(compute_pi(&m, c(0.0), &q()).unwrap().re, std::f64::consts::E, max_relative = 1e-14);
        let p = compute_pi(&m, c(0.5), &q()).unwrap().re;
        assert_relative_eq!(p, 2f64.powf(0.25).exp(), max_relative = 1e-14);
        assert!((p - 3.284_476_0).abs() < 1e-7);
        let unmatched = ModelSpec::stable(0.75, 1.0, 0.5, 0.3).unwrap();
        assert!(compute_b(&unmatched, c(0.0), &q()).unwrap_err().is_precondition());
    }

    #[test]
    fn small_extraction_matches_gf_at_zero() {
        let m = ModelSpec::stable(0.5, 1.0, 0.75, 0.25).unwrap();
        let inv = InversionSettings {
            radius: 0.5,
            samples: 256,
            ..Default::default()
        };
        let u = extract_measure(&m, MeasureKind::DistributionU, 16, &inv, &q()).unwrap();
        assert!((u.values()[0] - (-1.0f64).exp()).abs() < 1e-12);
        // U(s) = exp(-(1-s)^{1/4}): u_1/u_0 = 1/4
        assert!((u.values()[1] / u.values()[0] - 0.25).abs() < 1e-10);
        let neg = ModelSpec::stable(0.75, 1.0, 0.5, 0.25).unwrap();
        let pi = extract_measure(&neg, MeasureKind::MeasurePi, 16, &inv, &q()).unwrap();
        assert!((pi.values()[0] - std::f64::consts::E).abs() < 1e-11);
        assert!((pi.values()[1] / pi.values()[0] - 0.25).abs() < 1e-10);
    }
}
