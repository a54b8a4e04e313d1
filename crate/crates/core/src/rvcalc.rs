//! Regular-variation toolkit: slowly varying specs and the derived
//! evaluators `Λ`, `λ(t;s)`, `𝒩`, `τ`, `T`, `𝓜`, `K` and `𝖫 = ℓ/𝓛`.

use crate::laws::ModelSpec;
use crate::quad::{self, QuadSettings};
use crate::{Complex64, Error, Result};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// A slowly varying function `L(x)`, `x ≥ 1`, with its limit constant and
/// remainder rate when known.
#[derive(Debug, Clone, PartialEq)]
pub enum SlowlyVaryingSpec {
    /// `L ≡ c`.
    Constant { c: f64 },
    /// `L(x) = c (1 + κ x^{-exponent})`, remainder `x^{-exponent}`.
    Perturbed { c: f64, kappa: f64, exponent: f64 },
    /// `L(x) = 1 + ln x`; not slowly varying with a power remainder.
    /// The declared remainder `x^{-remainder_exponent}` exists for negative tests.
    Log { remainder_exponent: f64 },
    /// `L(x) = sign · x^{index} · P(1 - 1/x)` for a polynomial `P`
    /// (the slowly varying part of a user-supplied finite law).
    Series {
        coefficients: Arc<[f64]>,
        index: f64,
        sign: f64,
    },
}

impl SlowlyVaryingSpec {
    pub fn constant(c: f64) -> Self {
        Self::Constant { c }
    }

    pub fn perturbed(c: f64, kappa: f64, exponent: f64) -> Self {
        if kappa == 0.0 {
            Self::Constant { c }
        } else {
            Self::Perturbed { c, kappa, exponent }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Perturbed { c, kappa, exponent } => c * (1.0 + kappa * x.powf(-exponent)),
            Self::Log { .. } => 1.0 + x.ln(),
            Self::Series {
                coefficients,
                index,
                sign,
            } => sign * x.powf(*index) * horner(coefficients, 1.0 - 1.0 / x),
        }
    }

    /// `L(1/w)` for complex `w` with `Re w ≥ 0`, principal branches.
    pub fn eval_at_reciprocal(&self, w: Complex64) -> Complex64 {
        match self {
            Self::Constant { c } => Complex64::new(*c, 0.0),
            Self::Perturbed { c, kappa, exponent } => (w.powf(*exponent) * *kappa + 1.0) * *c,
            Self::Log { .. } => Complex64::new(1.0, 0.0) - w.ln(),
            Self::Series {
                coefficients,
                index,
                sign,
            } => w.powf(-index) * horner_c(coefficients, Complex64::new(1.0, 0.0) - w) * *sign,
        }
    }

    pub fn limit_constant(&self) -> Option<f64> {
        match self {
            Self::Constant { c } | Self::Perturbed { c, .. } => Some(*c),
            _ => None,
        }
    }

    /// Declared remainder rate `α(x)`.
    pub fn remainder(&self, x: f64) -> Option<f64> {
        match self {
            Self::Constant { .. } => Some(1.0 / x),
            Self::Perturbed { exponent, .. } => Some(x.powf(-exponent)),
            Self::Log { remainder_exponent } => Some(x.powf(-remainder_exponent)),
            Self::Series { .. } => None,
        }
    }

    /// Lower and upper bounds of `L` on `[y, ∞)` when the family is monotone.
    pub fn tail_envelope(&self, y: f64) -> Option<(f64, f64)> {
        match self {
            Self::Constant { c } => Some((*c, *c)),
            Self::Perturbed { c, .. } => {
                let at = self.eval(y);
                Some((at.min(*c), at.max(*c)))
            }
            _ => None,
        }
    }
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn horner_c(coefficients: &[f64], x: Complex64) -> Complex64 {
    coefficients
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a)
}

impl fmt::Display for SlowlyVaryingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { c } => write!(f, "constant({c})"),
            Self::Perturbed { c, kappa, exponent } => write!(f, "perturbed({c},{kappa},{exponent})"),
            Self::Log { remainder_exponent } if *remainder_exponent == 0.5 => write!(f, "log"),
            Self::Log { remainder_exponent } => write!(f, "log({remainder_exponent})"),
            Self::Series { index, .. } => write!(f, "series(index={index})"),
        }
    }
}

impl FromStr for SlowlyVaryingSpec {
    type Err = Error;

    /// Accepts `constant(c)`, `perturbed(c,kappa,exponent)` and `log`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("unrecognised slowly varying spec `{s}`"));
        if s == "log" {
            return Ok(Self::Log {
                remainder_exponent: 0.5,
            });
        }
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let spec = match (&s[..open], args.as_slice()) {
            ("constant", [c]) => Self::Constant { c: *c },
            ("perturbed", [c, kappa, exponent]) => Self::Perturbed {
                c: *c,
                kappa: *kappa,
                exponent: *exponent,
            },
            ("log", [e]) => Self::Log { remainder_exponent: *e },
            _ => return Err(bad()),
        };
        if let Some(c) = spec.limit_constant() {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("limit constant must be positive in `{s}`")));
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaShift {
    /// `λ(t;s) = νt + 1/Λ(1-s)`.
    pub lambda: f64,
    /// `ν(t;s) = Λ(1-s)·νt + 1`.
    pub nu_ts: f64,
}

/// Indices and slowly varying parts of a model, with derived evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct RvContext {
    pub nu: f64,
    pub delta: f64,
    pub offspring_sv: SlowlyVaryingSpec,
    pub immigration_sv: SlowlyVaryingSpec,
    pub quad: QuadSettings,
}

impl RvContext {
    pub fn new(nu: f64, delta: f64, offspring_sv: SlowlyVaryingSpec, immigration_sv: SlowlyVaryingSpec) -> Self {
        Self {
            nu,
            delta,
            offspring_sv,
            immigration_sv,
            quad: QuadSettings::default().with_rel_tol(1e-12),
        }
    }

    pub fn from_model(model: &ModelSpec) -> Self {
        Self::new(
            model.offspring().nu(),
            model.immigration().delta(),
            model.offspring().sv().clone(),
            model.immigration().sv().clone(),
        )
    }

    pub fn gamma(&self) -> f64 {
        self.delta - self.nu
    }

    pub fn mu(&self) -> f64 {
        2.0 * self.delta - self.nu
    }

    fn lambda_raw(&self, y: f64) -> f64 {
        y.powf(self.nu) * self.offspring_sv.eval(1.0 / y)
    }

    /// `Λ(y) = y^ν 𝓛(1/y)` on `(0, 1]`.
    pub fn lambda(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::Domain { what: "y", value: y });
        }
        Ok(self.lambda_raw(y))
    }

    /// `λ(t;s)` and `ν(t;s)`; the `Λ^{-1}` in `λ` is the reciprocal `1/Λ`.
    pub fn lambda_shift(&self, t: f64, s: f64) -> Result<LambdaShift> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain { what: "s", value: s });
        }
        if t < 0.0 {
            return Err(Error::Domain { what: "t", value: t });
        }
        let lam = self.lambda(1.0 - s)?;
        Ok(LambdaShift {
            lambda: self.nu * t + 1.0 / lam,
            nu_ts: lam * self.nu * t + 1.0,
        })
    }

    /// `𝒩(t)`: fixed point of `N = 𝓛((νt)^{1/ν} / N)^{-1/ν}`.
    pub fn script_n(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain { what: "t", value: t });
        }
        let scale = (self.nu * t).powf(1.0 / self.nu);
        let map = |n: f64| -> Result<f64> {
            let l = self.offspring_sv.eval(scale / n);
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::NoConvergence(format!("𝓛 is not positive at x = {}", scale / n)));
            }
            Ok(l.powf(-1.0 / self.nu))
        };
        let mut n = map(1.0)?;
        let mut damping = 1.0;
        let mut last_step = f64::INFINITY;
        for _ in 0..1000 {
            let next = map(n)?;
            let step = (next - n).abs();
            if step <= 1e-13 * n.abs() {
                return Ok(next);
            }
            if step >= last_step {
                damping *= 0.5;
            }
            last_step = step;
            n += damping * (next - n);
        }
        Err(Error::NoConvergence(format!("𝒩({t}) fixed-point iteration")))
    }

    /// Residual `|𝒩^ν(t) 𝓛(τ(t)) - 1|` of the defining relation.
    pub fn script_n_residual(&self, t: f64) -> Result<f64> {
        let n = self.script_n(t)?;
        let tau = (self.nu * t).powf(1.0 / self.nu) / n;
        Ok((n.powf(self.nu) * self.offspring_sv.eval(tau) - 1.0).abs())
    }

    /// `τ(t) = (νt)^{1/ν} / 𝒩(t)`.
    pub fn tau(&self, t: f64) -> Result<f64> {
        Ok((self.nu * t).powf(1.0 / self.nu) / self.script_n(t)?)
    }

    /// `T(t) = τ(t)^{|γ|}`, defined for `γ < 0`.
    pub fn big_t(&self, t: f64) -> Result<f64> {
        if self.gamma() >= 0.0 {
            return Err(Error::Precondition(format!("T(t) needs γ < 0, got γ = {}", self.gamma())));
        }
        Ok(self.tau(t)?.powf(self.gamma().abs()))
    }

    /// `𝓜(s) = ∫_1^{1/(1-s)} dx / (x^{1-ν} 𝓛(x))`, integrated in `v = ln x`.
    pub fn m_gf(&self, s: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain { what: "s", value: s });
        }
        let upper = -(-s).ln_1p();
        let q = quad::integrate(
            |v: f64| (self.nu * v).exp() / self.offspring_sv.eval(v.exp()),
            0.0,
            upper,
            &self.quad,
        )?;
        Ok(q.value)
    }

    /// `K(x) = 𝓛(x)^{-δ/ν} ℓ(x)`.
    pub fn k_factor(&self, x: f64) -> f64 {
        self.offspring_sv.eval(x).powf(-self.delta / self.nu) * self.immigration_sv.eval(x)
    }

    /// Limit of `K` when both specs have limit constants.
    pub fn k_limit(&self) -> Option<f64> {
        Some(self.offspring_sv.limit_constant()?.powf(-self.delta / self.nu) * self.immigration_sv.limit_constant()?)
    }

    /// `𝖫(t) = ℓ(t) / 𝓛(t)`.
    pub fn l_ratio(&self, t: f64) -> f64 {
        self.immigration_sv.eval(t) / self.offspring_sv.eval(t)
    }

    /// `C_𝖫 = C_ℓ / C_𝓛`.
    pub fn c_ratio(&self) -> Option<f64> {
        Some(self.immigration_sv.limit_constant()? / self.offspring_sv.limit_constant()?)
    }

    /// Log-derivative remainder `yΛ'(y)/Λ(y) - ν` by central differences
    /// (step `y·1e-6`). Named apart from the immigration index `δ`.
    pub fn dlam(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::Domain { what: "y", value: y });
        }
        let h = y * 1e-6;
        let deriv = (self.lambda_raw(y + h) - self.lambda_raw(y - h)) / (2.0 * h);
        Ok(y * deriv / self.lambda_raw(y) - self.nu)
    }

    /// `ε(t) = -dlam(1/t)`.
    pub fn epsilon(&self, t: f64) -> Result<f64> {
        Ok(-self.dlam(1.0 / t)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvRemainderRow {
    pub x: f64,
    /// `sup_λ |L(λx)/L(x) - 1| / α(x)`.
    pub scale_ratio: f64,
    /// `|L(x) - C| / α(x)`, when a limit constant is declared.
    pub limit_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvRemainderReport {
    pub rows: Vec<SvRemainderRow>,
    pub top_decade_scale_sup: f64,
    pub top_decade_limit_sup: Option<f64>,
    pub declared_bound: f64,
    pub passed: bool,
}

/// Measure the slow-variation remainder of `spec` on a grid.
///
/// Passes when both ratios stay below `declared_bound` on the top decade of
/// `xs`.
pub fn check_sv_remainder(
    spec: &SlowlyVaryingSpec,
    lambdas: &[f64],
    xs: &[f64],
    declared_bound: f64,
) -> Result<SvRemainderReport> {
    if lambdas.is_empty() || xs.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("x grid must be increasing".into()));
    }
    let limit = spec.limit_constant();
    let mut rows = Vec::with_capacity(xs.len());
    for &x in xs {
        let alpha = spec
            .remainder(x)
            .ok_or_else(|| Error::InvalidParameter(format!("{spec} declares no remainder")))?;
        let lx = spec.eval(x);
        let scale_ratio = lambdas
            .iter()
            .map(|&lam| (spec.eval(lam * x) / lx - 1.0).abs() / alpha)
            .fold(0.0, f64::max);
        rows.push(SvRemainderRow {
            x,
            scale_ratio,
            limit_ratio: limit.map(|c| (lx - c).abs() / alpha),
        });
    }
    let x_top = xs[xs.len() - 1] / 10.0;
    let top: Vec<_> = rows.iter().filter(|r| r.x >= x_top).collect();
    let top_decade_scale_sup = top.iter().map(|r| r.scale_ratio).fold(0.0, f64::max);
    let top_decade_limit_sup = limit.map(|_| top.iter().filter_map(|r| r.limit_ratio).fold(0.0, f64::max));
    let passed = top_decade_scale_sup <= declared_bound && top_decade_limit_sup.is_none_or(|v| v <= declared_bound);
    Ok(SvRemainderReport {
        rows,
        top_decade_scale_sup,
        top_decade_limit_sup,
        declared_bound,
        passed,
    })
}

/// Logarithmically spaced grid with `per_decade` points per decade, both ends included.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=n)
        .map(|k| lo * 10f64.powf(decades * k as f64 / n as f64))
        .collect()
}
