//! Offspring and immigration intensity laws.
//!
//! A [`BranchingLaw`] holds intensities `a_0..a_J` of the infinitesimal
//! generating function `f(s) = Σ a_j s^j`; an [`ImmigrationLaw`] holds
//! `b_0..b_J` of `g(s)`. The built-in stable families
//!
//! ```text
//! f(s) = c (1-s)^{1+ν} + cκ (1-s)^{1+2ν}      𝓛(x) = c (1 + κ x^{-ν})
//! g(s) = -d (1-s)^δ   - dκ (1-s)^{2δ}         ℓ(x) = d (1 + κ x^{-δ})
//! ```
//!
//! keep their closed form for evaluation. Their truncated coefficients are an
//! exact finite law: the residual mass is folded into the last coefficient
//! and, for offspring, the linear term is re-balanced so that `Σ a_j = 0` and
//! `Σ j a_j = 0` hold to rounding.

use crate::rvcalc::SlowlyVaryingSpec;
use crate::textfmt::Section;
use crate::{Complex64, Error, Result};
use std::sync::Arc;

pub const DEFAULT_TRUNCATION: usize = 2000;
pub const TAU_MASS: f64 = 1e-9;
pub const TAU_CRIT: f64 = 1e-9;
/// Tolerance on `|C_𝖫 - |γ||` for Theorem-2 style computations.
pub const TAU_CL: f64 = 1e-9;

/// `(-1)^j binom(alpha, j)` for `j = 0..=n`, i.e. the coefficients of `(1-s)^alpha`.
pub fn binomial_series(alpha: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut c = 1.0;
    out.push(c);
    for j in 1..=n {
        c *= (j as f64 - 1.0 - alpha) / j as f64;
        out.push(c);
    }
    out
}

fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn horner(coefficients: &[f64], z: Complex64) -> Complex64 {
    coefficients
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn check_disc(z: Complex64) -> Result<()> {
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain {
            what: "|z|",
            value: z.norm(),
        });
    }
    Ok(())
}

/// Scale and perturbation weight of a built-in stable family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableForm {
    pub scale: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub law: &'static str,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub mass: f64,
    pub criticality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: TAU_MASS,
            criticality: TAU_CRIT,
        }
    }
}

/// Common surface of the two intensity laws.
pub trait IntensityLaw {
    fn coefficients(&self) -> &[f64];
    fn validate(&self, tolerances: &Tolerances) -> ValidationReport;
    /// Plain-text key=value block.
    fn to_section(&self, name: &str) -> Section;

    fn truncation_order(&self) -> usize {
        self.coefficients().len() - 1
    }
}

/// Offspring intensities `{a_j}` with tail index `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingLaw {
    coefficients: Vec<f64>,
    nu: f64,
    sv: SlowlyVaryingSpec,
    closed_form: Option<StableForm>,
    tail_bound: f64,
}

/// Offspring law `c(1-s)^{1+ν} + cκ(1-s)^{1+2ν}` truncated at `J`.
pub fn make_stable_offspring(nu: f64, c: f64, kappa: f64, truncation: usize) -> Result<BranchingLaw> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain { what: "nu", value: nu });
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain { what: "c", value: c });
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Domain { what: "kappa", value: kappa });
    }
    if truncation < 2 {
        return Err(Error::InvalidParameter(format!("offspring truncation J = {truncation} < 2")));
    }
    let main = binomial_series(1.0 + nu, truncation);
    let pert = binomial_series(1.0 + 2.0 * nu, truncation);
    let raw: Vec<f64> = main.iter().zip(&pert).map(|(m, p)| c * m + c * kappa * p).collect();
    if let Some((index, &value)) = raw.iter().enumerate().skip(2).find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeCoefficient { index, value });
    }
    let j = truncation;
    // solve a_1 + a_J = -S0 and a_1 + J a_J = -S1 over the remaining terms
    let rest = || raw.iter().enumerate().filter(|(k, _)| *k != 1 && *k != j);
    let s0 = neumaier(rest().map(|(_, v)| *v));
    let s1 = neumaier(rest().map(|(k, v)| k as f64 * v));
    let a_last = (s0 - s1) / (j as f64 - 1.0);
    let a_one = -s0 - a_last;
    let mut coefficients = raw.clone();
    coefficients[j] = a_last;
    coefficients[1] = a_one;
    if a_last < 0.0 {
        return Err(Error::NegativeCoefficient { index: j, value: a_last });
    }
    let tail_mass = -neumaier(raw.iter().copied());
    let tail_bound = tail_mass.abs() + (a_last - raw[j]).abs() + (a_one - raw[1]).abs();
    Ok(BranchingLaw {
        coefficients,
        nu,
        sv: SlowlyVaryingSpec::perturbed(c, kappa, nu),
        closed_form: Some(StableForm { scale: c, kappa }),
        tail_bound,
    })
}

impl BranchingLaw {
    /// User-supplied finite law; it must pass validation.
    pub fn from_coefficients(coefficients: Vec<f64>, nu: f64) -> Result<Self> {
        let law = Self::from_coefficients_unchecked(coefficients, nu)?;
        let report = law.validate(&Tolerances::default());
        if !report.passed() {
            return Err(Error::Validation(format!("offspring: {}", report.failures().join(", "))));
        }
        Ok(law)
    }

    /// Build without validation; [`IntensityLaw::validate`] reports the defects.
    pub fn from_coefficients_unchecked(coefficients: Vec<f64>, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Domain { what: "nu", value: nu });
        }
        if coefficients.len() < 3 {
            return Err(Error::InvalidParameter("offspring law needs at least a_0, a_1, a_2".into()));
        }
        let sv = SlowlyVaryingSpec::Series {
            coefficients: Arc::from(coefficients.as_slice()),
            index: 1.0 + nu,
            sign: 1.0,
        };
        Ok(Self {
            coefficients,
            nu,
            sv,
            closed_form: None,
            tail_bound: 0.0,
        })
    }

    /// Copy with `a_j` replaced; the result evaluates by series.
    pub fn with_coefficient(&self, j: usize, value: f64) -> Self {
        let mut coefficients = self.coefficients.clone();
        coefficients[j] = value;
        Self::from_coefficients_unchecked(coefficients, self.nu).expect("index already validated")
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn sv(&self) -> &SlowlyVaryingSpec {
        &self.sv
    }

    pub fn closed_form(&self) -> Option<StableForm> {
        self.closed_form
    }

    /// Sup over the closed disc of |closed form - truncated series|.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// The same finite law, evaluated by series only.
    pub fn truncated(&self) -> Self {
        let mut law = Self::from_coefficients_unchecked(self.coefficients.clone(), self.nu).expect("valid law");
        law.tail_bound = 0.0;
        law
    }

    /// `-a_1`, the total rate at which one individual transforms.
    pub fn total_rate(&self) -> f64 {
        -self.coefficients[1]
    }

    /// `f(1 - w)`.
    pub fn eval_complement(&self, w: Complex64) -> Complex64 {
        match self.closed_form {
            Some(_) => {
                if w.norm() == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                w.powf(1.0 + self.nu) * self.sv.eval_at_reciprocal(w)
            }
            None => horner(&self.coefficients, Complex64::new(1.0, 0.0) - w),
        }
    }

    /// `f(z)` for `|z| ≤ 1`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_disc(z)?;
        Ok(self.eval_complement(Complex64::new(1.0, 0.0) - z))
    }

    /// `f(z)` by the truncated series, regardless of closed form.
    pub fn eval_series(&self, z: Complex64) -> Result<Complex64> {
        check_disc(z)?;
        Ok(horner(&self.coefficients, z))
    }
}

impl IntensityLaw for BranchingLaw {
    fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let a = &self.coefficients;
        let worst = a
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != 1)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        let mass = neumaier(a.iter().copied());
        let crit = neumaier(a.iter().enumerate().map(|(j, v)| j as f64 * v));
        ValidationReport {
            law: "offspring",
            checks: vec![
                Check {
                    name: "a0_positive",
                    passed: a[0] > 0.0,
                    residual: a[0],
                },
                Check {
                    name: "a1_negative",
                    passed: a[1] < 0.0,
                    residual: a[1],
                },
                Check {
                    name: "sign_pattern",
                    passed: worst >= 0.0,
                    residual: worst.min(0.0),
                },
                Check {
                    name: "mass_balance",
                    passed: mass.abs() <= tol.mass,
                    residual: mass.abs(),
                },
                Check {
                    name: "criticality",
                    passed: crit.abs() <= tol.criticality,
                    residual: crit.abs(),
                },
            ],
        }
    }

    fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        match self.closed_form {
            Some(form) => {
                s.push("family", "stable");
                s.push("nu", self.nu);
                s.push("c", form.scale);
                s.push("kappa", form.kappa);
                s.push("truncation", self.truncation_order());
            }
            None => {
                s.push("family", "coefficients");
                s.push("nu", self.nu);
                s.push("coefficients", join(&self.coefficients));
            }
        }
        s
    }
}

impl BranchingLaw {
    pub fn from_section(section: &Section) -> Result<Self> {
        let nu: f64 = section.parse_required("nu")?;
        match section.get("family").unwrap_or("stable") {
            "stable" => make_stable_offspring(
                nu,
                section.parse_or("c", 1.0)?,
                section.parse_or("kappa", 0.0)?,
                section.parse_or("truncation", DEFAULT_TRUNCATION)?,
            ),
            "coefficients" => {
                let coefficients = section
                    .parse_list("coefficients")?
                    .ok_or_else(|| missing(section, "coefficients"))?;
                Self::from_coefficients(coefficients, nu)
            }
            other => Err(unknown_family(section, other)),
        }
    }
}

/// Immigration intensities `{b_j}` with tail index `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationLaw {
    coefficients: Vec<f64>,
    delta: f64,
    sv: SlowlyVaryingSpec,
    closed_form: Option<StableForm>,
    tail_bound: f64,
}

/// Immigration law `-d(1-s)^δ - dκ(1-s)^{2δ}` truncated at `J`.
pub fn make_stable_immigration(delta: f64, d: f64, kappa: f64, truncation: usize) -> Result<ImmigrationLaw> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain {
            what: "delta",
            value: delta,
        });
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain { what: "d", value: d });
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Domain { what: "kappa", value: kappa });
    }
    if truncation < 1 {
        return Err(Error::InvalidParameter("immigration truncation J must be at least 1".into()));
    }
    let main = binomial_series(delta, truncation);
    let pert = binomial_series(2.0 * delta, truncation);
    let raw: Vec<f64> = main.iter().zip(&pert).map(|(m, p)| -d * m - d * kappa * p).collect();
    if let Some((index, &value)) = raw.iter().enumerate().skip(1).find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeCoefficient { index, value });
    }
    let mut coefficients = raw.clone();
    let last = -neumaier(raw[..truncation].iter().copied());
    coefficients[truncation] = last;
    let tail_mass = -neumaier(raw.iter().copied());
    Ok(ImmigrationLaw {
        coefficients,
        delta,
        sv: SlowlyVaryingSpec::perturbed(d, kappa, delta),
        closed_form: Some(StableForm { scale: d, kappa }),
        tail_bound: tail_mass.abs() + (last - raw[truncation]).abs(),
    })
}

impl ImmigrationLaw {
    pub fn from_coefficients(coefficients: Vec<f64>, delta: f64) -> Result<Self> {
        let law = Self::from_coefficients_unchecked(coefficients, delta)?;
        let report = law.validate(&Tolerances::default());
        if !report.passed() {
            return Err(Error::Validation(format!("immigration: {}", report.failures().join(", "))));
        }
        Ok(law)
    }

    pub fn from_coefficients_unchecked(coefficients: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain {
                what: "delta",
                value: delta,
            });
        }
        if coefficients.len() < 2 {
            return Err(Error::InvalidParameter("immigration law needs at least b_0, b_1".into()));
        }
        let sv = SlowlyVaryingSpec::Series {
            coefficients: Arc::from(coefficients.as_slice()),
            index: delta,
            sign: -1.0,
        };
        Ok(Self {
            coefficients,
            delta,
            sv,
            closed_form: None,
            tail_bound: 0.0,
        })
    }

    pub fn with_coefficient(&self, j: usize, value: f64) -> Self {
        let mut coefficients = self.coefficients.clone();
        coefficients[j] = value;
        Self::from_coefficients_unchecked(coefficients, self.delta).expect("index already validated")
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sv(&self) -> &SlowlyVaryingSpec {
        &self.sv
    }

    pub fn closed_form(&self) -> Option<StableForm> {
        self.closed_form
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn truncated(&self) -> Self {
        Self::from_coefficients_unchecked(self.coefficients.clone(), self.delta).expect("valid law")
    }

    /// `-b_0`, the total immigration rate.
    pub fn total_rate(&self) -> f64 {
        -self.coefficients[0]
    }

    /// `g(1 - w)`.
    pub fn eval_complement(&self, w: Complex64) -> Complex64 {
        match self.closed_form {
            Some(_) => {
                if w.norm() == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                -(w.powf(self.delta) * self.sv.eval_at_reciprocal(w))
            }
            None => horner(&self.coefficients, Complex64::new(1.0, 0.0) - w),
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_disc(z)?;
        Ok(self.eval_complement(Complex64::new(1.0, 0.0) - z))
    }

    pub fn eval_series(&self, z: Complex64) -> Result<Complex64> {
        check_disc(z)?;
        Ok(horner(&self.coefficients, z))
    }

    pub fn from_section(section: &Section) -> Result<Self> {
        let delta: f64 = section.parse_required("delta")?;
        match section.get("family").unwrap_or("stable") {
            "stable" => make_stable_immigration(
                delta,
                section.parse_or("d", 1.0)?,
                section.parse_or("kappa", 0.0)?,
                section.parse_or("truncation", DEFAULT_TRUNCATION)?,
            ),
            "coefficients" => {
                let coefficients = section
                    .parse_list("coefficients")?
                    .ok_or_else(|| missing(section, "coefficients"))?;
                Self::from_coefficients(coefficients, delta)
            }
            other => Err(unknown_family(section, other)),
        }
    }
}

impl IntensityLaw for ImmigrationLaw {
    fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let b = &self.coefficients;
        let worst = b[1..].iter().copied().fold(f64::INFINITY, f64::min);
        let mass = neumaier(b.iter().copied());
        ValidationReport {
            law: "immigration",
            checks: vec![
                Check {
                    name: "b0_negative",
                    passed: b[0] < 0.0,
                    residual: b[0],
                },
                Check {
                    name: "sign_pattern",
                    passed: worst >= 0.0,
                    residual: worst.min(0.0),
                },
                Check {
                    name: "mass_balance",
                    passed: mass.abs() <= tol.mass,
                    residual: mass.abs(),
                },
            ],
        }
    }

    fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        match self.closed_form {
            Some(form) => {
                s.push("family", "stable");
                s.push("delta", self.delta);
                s.push("d", form.scale);
                s.push("kappa", form.kappa);
                s.push("truncation", self.truncation_order());
            }
            None => {
                s.push("family", "coefficients");
                s.push("delta", self.delta);
                s.push("coefficients", join(&self.coefficients));
            }
        }
        s
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

fn missing(section: &Section, key: &str) -> Error {
    Error::Parse {
        line: section.line,
        message: format!("[{}] is missing required field `{key}`", section.name),
    }
}

fn unknown_family(section: &Section, family: &str) -> Error {
    let line = section.entry("family").map_or(section.line, |e| e.line);
    Error::Parse {
        line,
        message: format!("unknown family `{family}` (expected `stable` or `coefficients`)"),
    }
}

/// An offspring law paired with an immigration law.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    offspring: BranchingLaw,
    immigration: ImmigrationLaw,
}

impl ModelSpec {
    pub fn new(offspring: BranchingLaw, immigration: ImmigrationLaw) -> Result<Self> {
        let gamma = immigration.delta() - offspring.nu();
        if gamma.abs() < 1e-12 {
            return Err(Error::Precondition("γ = δ - ν = 0 is not supported".into()));
        }
        Ok(Self { offspring, immigration })
    }

    /// Convenience constructor for the stable families.
    pub fn stable(nu: f64, c: f64, delta: f64, d: f64) -> Result<Self> {
        Self::new(
            make_stable_offspring(nu, c, 0.0, DEFAULT_TRUNCATION)?,
            make_stable_immigration(delta, d, 0.0, DEFAULT_TRUNCATION)?,
        )
    }

    pub fn offspring(&self) -> &BranchingLaw {
        &self.offspring
    }

    pub fn immigration(&self) -> &ImmigrationLaw {
        &self.immigration
    }

    pub fn gamma(&self) -> f64 {
        self.immigration.delta() - self.offspring.nu()
    }

    pub fn mu(&self) -> f64 {
        2.0 * self.immigration.delta() - self.offspring.nu()
    }

    pub fn c_offspring(&self) -> Option<f64> {
        self.offspring.sv().limit_constant()
    }

    pub fn c_immigration(&self) -> Option<f64> {
        self.immigration.sv().limit_constant()
    }

    /// `C_𝖫 = C_ℓ / C_𝓛`.
    pub fn c_ratio(&self) -> Option<f64> {
        Some(self.c_immigration()? / self.c_offspring()?)
    }

    /// Both laws are evaluated through their closed forms.
    pub fn is_closed_form(&self) -> bool {
        self.offspring.closed_form.is_some() && self.immigration.closed_form.is_some()
    }

    /// The same finite laws, evaluated by series (the law the simulator runs).
    pub fn truncated(&self) -> Self {
        Self {
            offspring: self.offspring.truncated(),
            immigration: self.immigration.truncated(),
        }
    }

    pub fn require_positive_gamma(&self) -> Result<()> {
        if self.gamma() <= 0.0 {
            return Err(Error::Precondition(format!("requires γ > 0, got γ = {}", self.gamma())));
        }
        Ok(())
    }

    /// `γ < 0`, `μ > 0` and `|C_𝖫 - |γ|| ≤ τ_CL`.
    pub fn require_theorem2(&self) -> Result<()> {
        let gamma = self.gamma();
        if gamma >= 0.0 {
            return Err(Error::Precondition(format!("requires γ < 0, got γ = {gamma}")));
        }
        if self.mu() <= 0.0 {
            return Err(Error::Precondition(format!("requires μ = 2δ - ν > 0, got μ = {}", self.mu())));
        }
        match self.c_ratio() {
            Some(cl) if (cl - gamma.abs()).abs() <= TAU_CL => Ok(()),
            Some(cl) => Err(Error::Precondition(format!("requires C_𝖫 = |γ| = {}, got C_𝖫 = {cl}", gamma.abs()))),
            None => Err(Error::Precondition("C_𝖫 undefined: laws have no limit constants".into())),
        }
    }

    pub fn f_complement(&self, w: Complex64) -> Complex64 {
        self.offspring.eval_complement(w)
    }

    pub fn g_complement(&self, w: Complex64) -> Complex64 {
        self.immigration.eval_complement(w)
    }

    /// `𝖫(1/w) = ℓ(1/w) / 𝓛(1/w)` for closed-form models.
    fn l_ratio_at_reciprocal(&self, w: Complex64) -> Complex64 {
        self.immigration.sv().eval_at_reciprocal(w) / self.offspring.sv().eval_at_reciprocal(w)
    }

    /// `(g/f)(1 - w) · w`, the integrand of `∫ g/f du` in `v = -ln(1-u)`.
    pub fn ratio_times_w(&self, w: Complex64) -> Complex64 {
        if self.is_closed_form() {
            -(w.powf(self.gamma()) * self.l_ratio_at_reciprocal(w))
        } else {
            self.g_complement(w) / self.f_complement(w) * w
        }
    }

    /// `[(g/f)(1 - w) + |γ| w^{-1-|γ|}] · w` with the singular parts cancelled
    /// analytically for closed-form models.
    pub fn regularized_times_w(&self, w: Complex64) -> Complex64 {
        let abs_gamma = self.gamma().abs();
        match (self.offspring.closed_form, self.immigration.closed_form) {
            (Some(off), Some(imm)) => {
                // |γ| - 𝖫(1/w) = (|γ| - d/c) + (d/c)(κ_o w^ν - κ_i w^δ)/(1 + κ_o w^ν)
                let ratio = imm.scale / off.scale;
                let wn = if off.kappa == 0.0 { Complex64::new(0.0, 0.0) } else { w.powf(self.offspring.nu()) * off.kappa };
                let wd = if imm.kappa == 0.0 { Complex64::new(0.0, 0.0) } else { w.powf(self.immigration.delta()) * imm.kappa };
                let diff = (wn - wd) / (wn + 1.0) * ratio + (abs_gamma - ratio);
                if diff.norm() == 0.0 {
                    return diff;
                }
                w.powf(-abs_gamma) * diff
            }
            _ => self.ratio_times_w(w) + w.powf(-abs_gamma) * abs_gamma,
        }
    }

    pub fn to_sections(&self) -> [Section; 2] {
        [self.offspring.to_section("offspring"), self.immigration.to_section("immigration")]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn binomial_series_matches_direct_formula() {
        // (1-s)^{1.5}: 1, -1.5, 0.375, 0.0625, ...
        let b = binomial_series(1.5, 4);
        assert_eq!(&b[..3], &[1.0, -1.5, 0.375]);
        assert_relative_eq!(b[3], 1.5 * 0.5 * 0.5 / 6.0, max_relative = 1e-15);
        // integer exponent terminates
        assert_eq!(binomial_series(2.0, 4), vec![1.0, -2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn stable_offspring_examples() {
        let law = make_stable_offspring(0.5, 1.0, 0.0, 2000).unwrap();
        let a = law.coefficients();
        assert_eq!(a[0], 1.0);
        assert_eq!(a[2], 0.375);
        assert!((a[1] + 1.5).abs() < 1e-4, "rebalanced a_1 = {}", a[1]);
        assert_eq!(make_stable_offspring(0.5, 2.0, 0.0, 10).unwrap().coefficients()[0], 2.0);
        let small = make_stable_offspring(0.5, 1.0, 0.0, 2).unwrap();
        assert_eq!(small.coefficients(), &[1.0, -2.0, 1.0]);
    }

    #[test]
    fn rebalancing_restores_mass_and_criticality() {
        for (nu, kappa, j) in [(0.5, 0.0, 2000), (0.3, 1.0, 50), (0.75, 0.0, 7), (0.5, 1.0, 2000)] {
            let law = make_stable_offspring(nu, 1.0, kappa, j).unwrap();
            let report = law.validate(&Tolerances::default());
            assert!(report.passed(), "{report:?}");
            assert!(report.check("mass_balance").unwrap().residual <= 1e-12);
        }
    }

    #[test]
    fn coefficients_of_three_halves_power_are_positive() {
        let b = binomial_series(1.0 + 0.37, 500);
        assert!(b[2..].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn oversized_perturbation_is_rejected() {
        // 1 + 2ν = 2.6: the κ-branch has negative coefficients from j = 3
        let err = make_stable_offspring(0.8, 1.0, 50.0, 100).unwrap_err();
        assert!(matches!(err, Error::NegativeCoefficient { .. }));
        assert!(make_stable_offspring(1.0, 1.0, 0.0, 100).is_err());
        assert!(make_stable_offspring(0.5, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn stable_immigration_examples() {
        let law = make_stable_immigration(0.75, 0.25, 0.0, 2000).unwrap();
        let b = law.coefficients();
        assert_eq!(b[0], -0.25);
        assert_relative_eq!(b[1], 0.1875, max_relative = 1e-15);
        assert_relative_eq!(b[2], 0.023_437_5, max_relative = 1e-15);
        assert!(law.validate(&Tolerances::default()).passed());
        let half = make_stable_immigration(0.5, 1.0, 0.0, 10).unwrap();
        assert_relative_eq!(half.coefficients()[1], 0.5);
        // 2δ = 1.5 > 1 with a large κ breaks the sign pattern at j = 2
        assert!(make_stable_immigration(0.75, 1.0, 10.0, 50).is_err());
    }

    #[test]
    fn validation_flags_injected_defects() {
        let law = make_stable_offspring(0.5, 1.0, 0.0, 2000).unwrap();
        assert!(law.validate(&Tolerances::default()).check("mass_balance").unwrap().residual <= 1e-6);
        let neg = law.with_coefficient(2, -0.1);
        let r = neg.validate(&Tolerances::default());
        assert!(!r.check("sign_pattern").unwrap().passed);
        let off = law.with_coefficient(1, -1.4);
        let r = off.validate(&Tolerances::default());
        assert!(!r.check("criticality").unwrap().passed);
        let imm = make_stable_immigration(0.5, 1.0, 0.0, 20).unwrap().with_coefficient(3, -0.01);
        assert!(!imm.validate(&Tolerances::default()).passed());
    }

    #[test]
    fn evaluation_examples() {
        let f = make_stable_offspring(0.5, 1.0, 0.0, 2000).unwrap();
        assert_eq!(f.eval(c(1.0)).unwrap(), c(0.0));
        assert_relative_eq!(f.eval(c(0.5)).unwrap().re, 0.5f64.powf(1.5), max_relative = 1e-15);
        let series = f.eval_series(c(0.5)).unwrap();
        assert!((series - f.eval(c(0.5)).unwrap()).norm() <= f.tail_bound());
        let g = make_stable_immigration(0.75, 0.25, 0.0, 2000).unwrap();
        assert_eq!(g.eval(c(0.0)).unwrap(), c(-0.25));
        assert!(f.eval(c(1.01)).is_err());
    }

    #[test]
    fn user_coefficients_round_trip_through_text() {
        let law = BranchingLaw::from_coefficients(vec![0.5, -1.0, 0.5], 0.5).unwrap();
        let back = BranchingLaw::from_section(&law.to_section("offspring")).unwrap();
        assert_eq!(law.coefficients(), back.coefficients());
        assert!(BranchingLaw::from_coefficients(vec![0.5, -1.2, 0.5], 0.5).is_err());
        let imm = ImmigrationLaw::from_coefficients(vec![-1.0, 0.25, 0.75], 0.5).unwrap();
        let back = ImmigrationLaw::from_section(&imm.to_section("immigration")).unwrap();
        assert_eq!(imm.coefficients(), back.coefficients());
    }

    #[test]
    fn stable_text_round_trip() {
        let model = ModelSpec::new(
            make_stable_offspring(0.5, 1.0, 1.0, 300).unwrap(),
            make_stable_immigration(0.75, 0.25, 0.0, 300).unwrap(),
        )
        .unwrap();
        let [o, i] = model.to_sections();
        let again = ModelSpec::new(BranchingLaw::from_section(&o).unwrap(), ImmigrationLaw::from_section(&i).unwrap()).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn gamma_and_theorem2_preconditions() {
        assert!(ModelSpec::stable(0.5, 1.0, 0.5, 0.25).is_err());
        let m = ModelSpec::stable(0.75, 1.0, 0.5, 0.25).unwrap();
        assert_relative_eq!(m.gamma(), -0.25);
        assert_relative_eq!(m.mu(), 0.25);
        m.require_theorem2().unwrap();
        assert!(ModelSpec::stable(0.75, 1.0, 0.5, 0.3).unwrap().require_theorem2().is_err());
        assert!(ModelSpec::stable(0.5, 1.0, 0.75, 0.25).unwrap().require_theorem2().is_err());
        // μ ≤ 0
        assert!(ModelSpec::stable(0.8, 1.0, 0.3, 0.5).unwrap().require_theorem2().is_err());
    }

    #[test]
    fn regularized_integrand_vanishes_for_matched_canonical_family() {
        let m = ModelSpec::stable(0.75, 1.0, 0.5, 0.25).unwrap();
        for w in [c(0.5), Complex64::new(0.1, 0.3), c(1e-9)] {
            assert_eq!(m.regularized_times_w(w).norm(), 0.0);
        }
        // series route agrees with the closed-form route away from w = 0
        let t = m.truncated();
        let w = c(0.6);
        assert!((t.ratio_times_w(w) - m.ratio_times_w(w)).norm() < 1e-3);
    }
}
