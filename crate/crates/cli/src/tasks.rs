//! Task runners. Each reads its parameters through [`Params`], checks the
//! model preconditions first and returns tables plus verdicts.

use crate::config::{fit_settings, inversion_settings, kernel_settings, List, Params, Task};
use mbpi::asymptotics::{self, LemmaReport};
use mbpi::inversion::InversionSettings;
use mbpi::invariants::{self, MeasureKind};
use mbpi::kernel::{self, Route};
use mbpi::laws::{IntensityLaw, ModelSpec, Tolerances, TAU_CRIT, TAU_MASS};
use mbpi::rvcalc::SlowlyVaryingSpec;
use mbpi::sim::{self, SimConfig, DEFAULT_STATE_CAP};
use mbpi::{Complex64, Error, Result};
use rayon::prelude::*;
use std::fmt::{self, Write as _};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    /// `(file name, contents)`.
    pub tables: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
    /// Conditions that `--strict` turns into failures.
    pub warnings: Vec<String>,
    /// Extra `[manifest]` entries.
    pub manifest: Vec<(String, String)>,
}

impl Outcome {
    fn verdict(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn table(&mut self, name: impl Into<String>, contents: String) {
        self.tables.push((name.into(), contents));
    }
}

pub struct Ctx<'a> {
    pub model: &'a ModelSpec,
    pub task: Params<'a>,
    pub inversion: Params<'a>,
    pub fit: Params<'a>,
    pub seed_override: Option<u64>,
}

pub fn run(kind: Task, ctx: &mut Ctx) -> Result<Outcome> {
    match kind {
        Task::Validate => validate(ctx),
        Task::Kernel => kernel_task(ctx),
        Task::Invariant => invariant(ctx),
        Task::Rates => rates(ctx),
        Task::Lemmas => lemmas(ctx),
        Task::Simulate => simulate(ctx),
        Task::Compare => compare(ctx),
    }
}

/// Parsed enum-like option whose text is kept for the resolved config.
macro_rules! choice {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        enum $name {
            $($variant),+
        }

        impl FromStr for $name {
            type Err = ();

            fn from_str(s: &str) -> std::result::Result<Self, ()> {
                match s.trim() {
                    $($text => Ok(Self::$variant),)+
                    _ => Err(()),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $(Self::$variant => $text),+
                })
            }
        }
    };
}

choice!(RouteChoice { Space => "space", Time => "time", Both => "both" });
choice!(MeasureChoice { Auto => "auto", U => "u", Pi => "pi" });
choice!(RateName { Auto => "auto", Theorem1 => "theorem1", Theorem2 => "theorem2", Corollary1 => "corollary1" });

fn validate(ctx: &mut Ctx) -> Result<Outcome> {
    let tol = Tolerances {
        mass: ctx.task.or("mass_tol", TAU_MASS)?,
        criticality: ctx.task.or("criticality_tol", TAU_CRIT)?,
    };
    let m = ctx.model;
    let mut out = Outcome::default();
    let mut table = String::from("law,check,residual,passed\n");
    for report in [m.offspring().validate(&tol), m.immigration().validate(&tol)] {
        for c in &report.checks {
            let _ = writeln!(table, "{},{},{:e},{}", report.law, c.name, c.residual, c.passed);
        }
        let detail = if report.passed() {
            format!("{} checks", report.checks.len())
        } else {
            format!("failing: {}", report.failures().join(", "))
        };
        out.verdict(format!("{} valid", report.law), report.passed(), detail);
    }
    out.table("validation.csv", table);
    out.notes.push(format!("gamma {} mu {}", m.gamma(), m.mu()));
    match m.c_ratio() {
        Some(cl) => out.notes.push(format!("C_L {cl} vs |gamma| {}", m.gamma().abs())),
        None => out.notes.push("C_L undefined for coefficient laws".into()),
    }
    Ok(out)
}

fn kernel_task(ctx: &mut Ctx) -> Result<Outcome> {
    let m = ctx.model;
    let ks = kernel_settings(&mut ctx.task)?;
    let t_grid = ctx.task.grid("t", "0.1,1,10,100")?;
    let s_grid = ctx.task.list("s", &[0.0, 0.3, 0.7, 0.95])?;
    let i: u32 = ctx.task.or("i", 0)?;
    let route = ctx.task.or("route", RouteChoice::Both)?;
    let route_tol = ctx.task.or("route_tol", 1e-9)?;
    let closed_tol = ctx.task.or("closed_form_tol", 1e-8)?;
    let rows_t: Option<f64> = ctx.task.optional("rows_t")?;
    let rows_setup = match rows_t {
        Some(_) => {
            let i_max: u32 = ctx.task.or("i_max", 3)?;
            let (inv, j_out) = inversion_settings(&mut ctx.inversion, 64)?;
            inv.check(j_out)?;
            Some((i_max, inv, j_out))
        }
        None => None,
    };

    let points: Vec<(f64, f64)> = t_grid.iter().flat_map(|&t| s_grid.iter().map(move |&s| (t, s))).collect();
    let primary = if route == RouteChoice::Time { Route::Time } else { Route::Space };
    let values: Vec<(kernel::GfValue, Option<kernel::GfValue>)> = points
        .par_iter()
        .map(|&(t, s)| {
            let z = Complex64::new(s, 0.0);
            let a = kernel::compute_p_i(m, i, t, z, &ks, primary)?;
            let b = match route {
                RouteChoice::Both => Some(kernel::compute_p_i(m, i, t, z, &ks, Route::Time)?),
                _ => None,
            };
            Ok((a, b))
        })
        .collect::<Result<_>>()?;

    let mut out = Outcome::default();
    let primary_values: Vec<kernel::GfValue> = values.iter().map(|v| v.0).collect();
    out.table("gf.csv", kernel::gf_table(&primary_values));

    if route == RouteChoice::Both {
        let mut table = String::from("t,s,ln_p_space_re,ln_p_space_im,ln_p_time_re,ln_p_time_im,abs_diff\n");
        let mut worst = 0.0f64;
        for (a, b) in &values {
            let b = b.expect("time route");
            let diff = (a.ln_p - b.ln_p).norm();
            worst = worst.max(diff);
            let _ = writeln!(
                table,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                a.t, a.s.re, a.ln_p.re, a.ln_p.im, b.ln_p.re, b.ln_p.im, diff
            );
        }
        out.table("routes.csv", table);
        out.verdict("kernel route agreement", worst <= route_tol, format!("max |d ln P| {worst:.2e} (tol {route_tol:e})"));
    }

    if let Some(form) = m.offspring().closed_form().filter(|f| f.kappa == 0.0) {
        let nu = m.offspring().nu();
        let worst = primary_values
            .iter()
            .map(|v| (v.r.re / kernel::closed_form_r(nu, form.scale, v.t, v.s.re) - 1.0).abs())
            .fold(0.0, f64::max);
        out.verdict("kernel closed form", worst <= closed_tol, format!("max rel err of R {worst:.2e} (tol {closed_tol:e})"));
    } else {
        out.notes.push("skip kernel closed form: offspring law has no closed-form flow".into());
    }

    if let (Some(t), Some((i_max, inv, j_out))) = (rows_t, rows_setup) {
        let rows = kernel::transition_rows(m, i_max, t, j_out, &ks, &inv)?;
        let worst = rows.iter().map(|r| r.sum() - 1.0 - r.total_bound()).fold(f64::NEG_INFINITY, f64::max);
        out.table("transitions.csv", kernel::row_table(t, &rows));
        out.verdict("transition rows substochastic", worst <= 1e-9, format!("max excess mass {:.2e}", worst.max(0.0)));
    }
    Ok(out)
}

fn invariant(ctx: &mut Ctx) -> Result<Outcome> {
    let m = ctx.model;
    let choice = ctx.task.or("measure", MeasureChoice::Auto)?;
    let kind = match choice {
        MeasureChoice::U => MeasureKind::DistributionU,
        MeasureChoice::Pi => MeasureKind::MeasurePi,
        MeasureChoice::Auto if m.gamma() > 0.0 => MeasureKind::DistributionU,
        MeasureChoice::Auto => MeasureKind::MeasurePi,
    };
    match kind {
        MeasureKind::DistributionU => m.require_positive_gamma()?,
        MeasureKind::MeasurePi => m.require_theorem2()?,
    }
    let ks = kernel_settings(&mut ctx.task)?;
    let clamp_tol = ctx.task.or("clamp_tol", 1e-9)?;
    let (inv, j_out) = inversion_settings(&mut ctx.inversion, 512)?;
    inv.check(j_out)?;
    let tau: Option<f64> = ctx.task.optional("tau")?;
    let invariance = match tau {
        Some(tau) => {
            let big_j: u32 = ctx.task.or("big_j", 256)?;
            let tol = ctx.task.or("residual_tol", 1e-6)?;
            if big_j as usize > j_out {
                return Err(Error::InvalidParameter(format!("big_j = {big_j} exceeds j_out = {j_out}")));
            }
            inv.check(big_j as usize)?;
            Some((tau, big_j, tol))
        }
        None => None,
    };
    let ratio_t: Option<crate::config::Grid> = ctx.task.optional("ratio_t")?;
    let ratio = match ratio_t {
        Some(grid) => {
            let j_max: usize = ctx.task.or("ratio_j", 4)?;
            let tol = ctx.task.or("ratio_tol", 1e-2)?;
            let settings = InversionSettings {
                radius: ctx.task.or("ratio_radius", 0.5)?,
                samples: ctx.task.or("ratio_samples", 64)?,
                ..Default::default()
            };
            settings.check(j_max)?;
            Some((grid.points, j_max, tol, settings))
        }
        None => None,
    };

    let mut out = Outcome::default();
    let measure = invariants::extract_measure(m, kind, j_out, &inv, &ks.quad)?;
    let s = &measure.series;
    out.table("measure.csv", invariants::measure_table(&measure, m));
    out.verdict(
        format!("{} nonnegative", kind.name()),
        s.max_clamp <= clamp_tol,
        format!("max clamp {:.2e} (tol {clamp_tol:e})", s.max_clamp),
    );
    out.notes.push(format!(
        "radius {} aliasing bound {:.2e} roundoff bound {:.2e}",
        s.radius, s.aliasing_bound, s.roundoff_bound
    ));
    if kind == MeasureKind::DistributionU {
        let sum = s.sum();
        out.verdict("u subprobability", sum <= 1.0 + s.total_bound() * (j_out as f64 + 1.0) + 1e-12, format!("sum_(j<=J) u_j = {sum:.10}"));
    }
    if s.max_clamp > 0.0 {
        out.warnings.push(format!("inversion clamped negative coefficients, largest {:.2e}", s.max_clamp));
    }

    if let Some((tau, big_j, tol)) = invariance {
        let rep = invariants::check_invariance(&measure, m, tau, big_j, &ks, &inv)?;
        let mut table = String::from("j,residual\n");
        for (j, r) in rep.residuals.iter().enumerate() {
            let _ = writeln!(table, "{j},{r:e}");
        }
        out.table("invariance.csv", table);
        let tail = rep.tail_estimate.map_or(String::new(), |t| format!(" tail estimate {t:.1e}"));
        out.verdict(
            "invariance",
            rep.max_residual <= tol,
            format!("max residual j<={} {:.2e} (tol {tol:e}) inversion bound {:.1e}{tail}", big_j / 2, rep.max_residual, rep.inversion_bound),
        );
    }

    if let Some((t_grid, j_max, tol, settings)) = ratio {
        let table = invariants::ratio_limits(m, j_max, &t_grid, &ks, &settings)?;
        out.table("ratios.csv", invariants::ratio_table_csv(&table));
        let worst = (1..=j_max).map(|j| *table.distances(j).last().expect("grid")).fold(0.0, f64::max);
        out.verdict("ratio limits", worst <= tol, format!("max |p_0j/p_00 - m_j/m_0| at t = {} is {worst:.2e} (tol {tol:e})", t_grid.last().expect("grid")));
    }
    Ok(out)
}

fn rates(ctx: &mut Ctx) -> Result<Outcome> {
    let m = ctx.model;
    let requested = ctx.task.or("which", List(vec![RateName::Auto]))?.0;
    let mut which = Vec::new();
    for r in requested {
        match r {
            RateName::Auto if m.gamma() > 0.0 => which.push(RateName::Theorem1),
            RateName::Auto => which.extend([RateName::Theorem2, RateName::Corollary1]),
            other => which.push(other),
        }
    }
    for r in &which {
        match r {
            RateName::Theorem1 => m.require_positive_gamma()?,
            _ => m.require_theorem2()?,
        }
    }
    let ks = kernel_settings(&mut ctx.task)?;
    let t_grid = ctx.task.grid("t", "log:1e2:1e6:5")?;
    let s = ctx.task.or("s", 0.0)?;
    let s_grid = ctx.task.list("s_grid", &[0.0, 0.25, 0.5, 0.75])?;
    let uniformity_max = ctx.task.or("uniformity_max", 10.0)?;
    let fit = fit_settings(&mut ctx.fit)?;

    let mut out = Outcome::default();
    for r in which {
        match r {
            RateName::Theorem1 => {
                let rep = asymptotics::rate_theorem1(m, s, &t_grid, &ks, &fit)?;
                out.table("rate_theorem1.csv", asymptotics::rate_table(&rep.fit, Some(&rep.envelope)));
                out.verdict(asymptotics::summary_line("theorem1", &rep.fit), rep.fit.passed, "");
                out.notes.push(format!("theorem1 fit at s = {s} over {} points", rep.fit.used.len()));
                out.notes.push(format!("theorem1 compensated error at t = {} is {:.6}", t_grid.last().expect("grid"), rep.compensated.last().expect("grid")));
            }
            RateName::Theorem2 => {
                let rep = asymptotics::rate_theorem2(m, &s_grid, &t_grid, &ks, &fit)?;
                out.table("rate_theorem2.csv", asymptotics::rate_table(&rep.fit, None));
                out.verdict(asymptotics::summary_line("theorem2", &rep.fit), rep.fit.passed, "");
                out.notes.push(format!("theorem2 fit at s = {} over {} points", s_grid[0], rep.fit.used.len()));
                out.verdict(
                    "theorem2 uniformity",
                    rep.uniformity_max <= uniformity_max,
                    format!("max ratio over s grid {:.3} (limit {uniformity_max})", rep.uniformity_max),
                );
                out.notes.push(format!("theorem2 limit value {:.8} vs pi(s) {:.8}", rep.limit_value, rep.pi_value));
            }
            RateName::Corollary1 => {
                let rep = asymptotics::rate_corollary1(m, &t_grid, &ks, &fit)?;
                out.table("rate_corollary1.csv", asymptotics::rate_table(&rep.fit, None));
                out.verdict(asymptotics::summary_line("corollary1", &rep.fit), rep.fit.passed, "");
                out.notes.push(format!("corollary1 fit over {} points", rep.fit.used.len()));
                out.notes.push(format!("corollary1 B(0) {:.10} pi(0) {:.8}", rep.b0, rep.pi0));
            }
            RateName::Auto => unreachable!("expanded above"),
        }
    }
    Ok(out)
}

fn lemmas(ctx: &mut Ctx) -> Result<Outcome> {
    let m = ctx.model;
    let mut out = Outcome::default();
    let default: Vec<u32> = if m.gamma() > 0.0 { vec![1, 2, 3, 4] } else { vec![1, 2, 3] };
    let which = ctx.task.or("which", List(default))?.0;
    if which.iter().any(|&n| !(1..=4).contains(&n)) {
        return Err(Error::InvalidParameter("lemmas are numbered 1 to 4".into()));
    }
    if which.contains(&4) {
        m.require_positive_gamma()?;
    } else if m.gamma() <= 0.0 {
        out.notes.push("skip lemma4: requires gamma > 0".into());
    }
    let ks = kernel_settings(&mut ctx.task)?;
    let mut reports: Vec<LemmaReport> = Vec::new();
    for n in which {
        let rep = match n {
            1 => {
                let s_grid = ctx.task.list("lemma1_s", &[0.0, 0.5, 0.9])?;
                let t = ctx.task.grid("lemma1_t", "log:10:1e5:2")?;
                let bound = ctx.task.or("lemma1_bound", 1e-3)?;
                asymptotics::check_lemma1(m, &s_grid, &t, &ks, bound)?
            }
            2 => {
                let s = ctx.task.or("lemma2_s", 0.0)?;
                let t = ctx.task.grid("lemma2_t", "log:10:1e6:4")?;
                let bound = ctx.task.or("lemma2_bound", 2.0)?;
                asymptotics::check_lemma2(m, s, &t, &ks, bound)?
            }
            3 => {
                let spec: SlowlyVaryingSpec = ctx.task.or("lemma3_spec", m.offspring().sv().clone())?;
                let sigma = ctx.task.or("lemma3_sigma", m.offspring().nu())?;
                let t = ctx.task.grid("lemma3_t", "log:10:1e6:4")?;
                let bound = ctx.task.or("lemma3_bound", 2.0)?;
                asymptotics::check_lemma3(&spec, sigma, &t, bound)?
            }
            _ => {
                let w = ctx.task.grid("lemma4_w", "log:1e-6:0.1:4")?;
                let bound = ctx.task.or("lemma4_bound", 2.0)?;
                let x: Vec<f64> = w.iter().rev().map(|w| 1.0 - w).collect();
                asymptotics::check_lemma4(m, &x, &ks.quad, bound)?
            }
        };
        reports.push(rep);
    }
    for rep in reports {
        out.table(format!("{}.csv", rep.name), asymptotics::lemma_table(&rep));
        let detail = if rep.name == "lemma1" {
            let last = rep.rows.iter().map(|r| r.x).fold(f64::NEG_INFINITY, f64::max);
            let end = rep.rows.iter().filter(|r| r.x == last).map(|r| r.value).fold(0.0, f64::max);
            format!("deviation at t = {last} is {end:.3e} (bound {:e}), decreasing in t", rep.bound)
        } else {
            format!("sup ratio {:.3e} (bound {:e})", rep.sup_ratio, rep.bound)
        };
        out.verdict(rep.name, rep.passed, detail);
    }
    Ok(out)
}

fn sim_config(ctx: &mut Ctx, default_replicates: u64) -> Result<SimConfig> {
    let i: u64 = ctx.task.or("i", 0)?;
    let horizon = ctx.task.or("horizon", 1.0)?;
    let replicates = ctx.task.or("replicates", default_replicates)?;
    let seed = match ctx.seed_override {
        Some(seed) => {
            ctx.task.resolved.push("seed", seed);
            seed
        }
        None => ctx.task.or("seed", 1u64)?,
    };
    let state_cap = ctx.task.or("state_cap", DEFAULT_STATE_CAP)?;
    Ok(SimConfig {
        state_cap,
        ..SimConfig::new(ctx.model.clone(), i, horizon, replicates, seed)
    })
}

fn note_sim(out: &mut Outcome, r: &sim::SimResult, seed: u64) {
    out.manifest.push(("seed".into(), seed.to_string()));
    out.manifest.push(("capped_fraction".into(), r.capped_fraction().to_string()));
    out.manifest.push(("rng_streams".into(), r.rng_streams_used.to_string()));
    out.notes.push(format!("{} replicates, {} events, capped fraction {}", r.replicates, r.events, r.capped_fraction()));
    if r.capped > 0 {
        out.warnings.push(format!("{} replicates reached the state cap and were excluded", r.capped));
    }
}

fn simulate(ctx: &mut Ctx) -> Result<Outcome> {
    let cfg = sim_config(ctx, 10_000)?;
    let r = sim::estimate_pmf(&cfg)?;
    let mut out = Outcome::default();
    out.table("pmf.csv", sim::pmf_table(&r));
    note_sim(&mut out, &r, cfg.seed);
    Ok(out)
}

fn compare(ctx: &mut Ctx) -> Result<Outcome> {
    let cfg = sim_config(ctx, 1000)?;
    let p_min = ctx.task.or("p_min", 1e-2)?;
    let z_max = ctx.task.or("z_max", 3.0)?;
    let ks = kernel_settings(&mut ctx.task)?;
    let (inv, j_out) = inversion_settings(&mut ctx.inversion, 64)?;
    inv.check(j_out)?;
    let i = u32::try_from(cfg.initial_state).map_err(|_| Error::InvalidParameter("initial state too large for the kernel".into()))?;

    // the simulator runs the finite law, so the kernel does too
    let finite = ctx.model.truncated();
    let row = kernel::transition_probs(&finite, i, cfg.horizon, j_out, &ks, &inv)?;
    let r = sim::estimate_pmf(&SimConfig {
        model: finite,
        ..cfg.clone()
    })?;
    let n = r.kept() as f64;
    let mut table = String::from("j,p_kernel,p_hat,se,z,tested\n");
    let mut worst = 0.0f64;
    let mut tested = 0;
    for (j, &pk) in row.values.iter().enumerate() {
        // standard error under the kernel probability; zero counts stay finite
        let se = (pk * (1.0 - pk) / n).sqrt();
        let z = if se > 0.0 { (r.p_hat(j) - pk) / se } else { f64::NAN };
        let test = pk >= p_min;
        if test {
            tested += 1;
            worst = worst.max(z.abs());
        }
        let _ = writeln!(table, "{j},{pk:e},{:e},{se:e},{z:e},{test}", r.p_hat(j));
    }
    let mut out = Outcome::default();
    out.table("compare.csv", table);
    out.verdict(
        "compare sim vs kernel",
        tested > 0 && worst <= z_max,
        format!("max |z| {worst:.2} over {tested} states with p >= {p_min} (limit {z_max})"),
    );
    note_sim(&mut out, &r, cfg.seed);
    Ok(out)
}
