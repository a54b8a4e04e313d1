//! Experiment configuration: parsing, defaults and the resolved record.
//!
//! Every value a task reads goes through [`Params`], which records the value
//! actually used. The resolved sections are written to the manifest and form
//! a complete config on their own.

use mbpi::asymptotics::{FitSettings, FitWindow};
use mbpi::inversion::InversionSettings;
use mbpi::kernel::KernelSettings;
use mbpi::laws::{BranchingLaw, ImmigrationLaw, ModelSpec};
use mbpi::rvcalc::log_grid;
use mbpi::textfmt::{Document, Section};
use mbpi::{Error, Result};
use std::fmt;
use std::str::FromStr;

pub const SECTIONS: [&str; 6] = ["offspring", "immigration", "task", "inversion", "fit", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Validate,
    Kernel,
    Invariant,
    Rates,
    Lemmas,
    Simulate,
    Compare,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Validate,
        Task::Kernel,
        Task::Invariant,
        Task::Rates,
        Task::Lemmas,
        Task::Simulate,
        Task::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::Kernel => "kernel",
            Task::Invariant => "invariant",
            Task::Rates => "rates",
            Task::Lemmas => "lemmas",
            Task::Simulate => "simulate",
            Task::Compare => "compare",
        }
    }
}

impl FromStr for Task {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Task::ALL.into_iter().find(|t| t.name() == s).ok_or(())
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A time grid, either listed or `log:lo:hi:per_decade`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub text: String,
    pub points: Vec<f64>,
}

impl FromStr for Grid {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        let text = s.trim().to_string();
        let points = if let Some(rest) = text.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [lo, hi, per] = parts.as_slice() else {
                return Err(());
            };
            let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| ())?, hi.parse().map_err(|_| ())?);
            let per: usize = per.parse().map_err(|_| ())?;
            if !(lo > 0.0 && hi >= lo && per > 0) {
                return Err(());
            }
            log_grid(lo, hi, per)
        } else {
            text.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| ())?
        };
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return Err(());
        }
        Ok(Grid { text, points })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Comma-separated list that renders back to the same text.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        s.split(',')
            .map(|v| v.trim())
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<T>().map_err(|_| ()))
            .collect::<std::result::Result<Vec<T>, ()>>()
            .map(List)
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// `top:n`, `full` or `range:lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window(pub FitWindow);

impl FromStr for Window {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |v: &str| v.parse::<f64>().map_err(|_| ());
        match parts.as_slice() {
            ["full"] => Ok(Window(FitWindow::Full)),
            ["top", n] => Ok(Window(FitWindow::TopDecades(num(n)?))),
            ["range", lo, hi] => Ok(Window(FitWindow::Range(num(lo)?, num(hi)?))),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            FitWindow::Full => write!(f, "full"),
            FitWindow::TopDecades(n) => write!(f, "top:{n}"),
            FitWindow::Range(lo, hi) => write!(f, "range:{lo}:{hi}"),
        }
    }
}

/// Reads one input section and records every value used.
pub struct Params<'a> {
    input: &'a Section,
    pub resolved: Section,
}

impl<'a> Params<'a> {
    pub fn new(input: &'a Section, name: &str) -> Self {
        Self {
            input,
            resolved: Section::new(name),
        }
    }

    pub fn or<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        let value = self.input.parse_or(key, default)?;
        self.resolved.push(key, value.to_string());
        Ok(value)
    }

    pub fn optional<T: FromStr + ToString>(&mut self, key: &str) -> Result<Option<T>> {
        let value: Option<T> = self.input.parse_opt(key)?;
        if let Some(v) = &value {
            self.resolved.push(key, v.to_string());
        }
        Ok(value)
    }

    pub fn grid(&mut self, key: &str, default: &str) -> Result<Vec<f64>> {
        let grid: Grid = match self.input.parse_opt(key)? {
            Some(g) => g,
            None => default.parse().expect("default grid"),
        };
        self.resolved.push(key, &grid);
        Ok(grid.points)
    }

    pub fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        Ok(self.or(key, List(default.to_vec()))?.0)
    }

    /// Keys in the input that no task read.
    pub fn unused(&self) -> Vec<String> {
        self.input
            .entries
            .iter()
            .filter(|e| self.resolved.entry(&e.key).is_none())
            .map(|e| format!("[{}] {} (line {})", self.input.name, e.key, e.line))
            .collect()
    }
}

/// Offspring and immigration laws. `validated` selects the checked
/// constructors; the `validate` task builds coefficient laws unchecked so
/// that it can report every failing check.
pub fn build_model(doc: &Document, validated: bool) -> Result<ModelSpec> {
    let off = doc.require("offspring")?;
    let imm = doc.require("immigration")?;
    let coefficients = |s: &Section| s.get("family") == Some("coefficients");
    let offspring = if !validated && coefficients(off) {
        let list = off.parse_list("coefficients")?.ok_or_else(|| missing(off, "coefficients"))?;
        BranchingLaw::from_coefficients_unchecked(list, off.parse_required("nu")?)?
    } else {
        BranchingLaw::from_section(off)?
    };
    let immigration = if !validated && coefficients(imm) {
        let list = imm.parse_list("coefficients")?.ok_or_else(|| missing(imm, "coefficients"))?;
        ImmigrationLaw::from_coefficients_unchecked(list, imm.parse_required("delta")?)?
    } else {
        ImmigrationLaw::from_section(imm)?
    };
    ModelSpec::new(offspring, immigration)
}

fn missing(section: &Section, key: &str) -> Error {
    Error::Parse {
        line: section.line,
        message: format!("[{}] is missing required field `{key}`", section.name),
    }
}

/// Fields the model sections accept.
pub fn model_keys(section: &str) -> &'static [&'static str] {
    match section {
        "offspring" => &["family", "nu", "c", "kappa", "truncation", "coefficients"],
        _ => &["family", "delta", "d", "kappa", "truncation", "coefficients"],
    }
}

pub fn inversion_settings(p: &mut Params, default_j_out: usize) -> Result<(InversionSettings, usize)> {
    let base = InversionSettings::default();
    let j_out: usize = p.or("j_out", default_j_out)?;
    let samples_default = base.samples.max(4 * j_out.next_power_of_two());
    let settings = InversionSettings {
        radius: p.or("radius", base.radius)?,
        samples: p.or("samples", samples_default)?,
        tolerance: p.or("tolerance", base.tolerance)?,
        eval_rel_error: p.or("eval_rel_error", base.eval_rel_error)?,
        adapt_radius: p.or("adapt_radius", base.adapt_radius)?,
    };
    Ok((settings, j_out))
}

pub fn fit_settings(p: &mut Params) -> Result<FitSettings> {
    let base = FitSettings::default();
    Ok(FitSettings {
        window: p.or("window", Window(base.window))?.0,
        slope_tol: p.or("slope_tol", base.slope_tol)?,
        r_squared_min: p.or("r2_min", base.r_squared_min)?,
        floor: p.or("floor", base.floor)?,
    })
}

pub fn kernel_settings(p: &mut Params) -> Result<KernelSettings> {
    let mut k = KernelSettings::default();
    k.ode.rel_tol = p.or("ode_rel_tol", k.ode.rel_tol)?;
    k.quad = k.quad.with_rel_tol(p.or("quad_rel_tol", k.quad.rel_tol)?);
    Ok(k)
}
