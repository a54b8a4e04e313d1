//! Structural identities of the kernel and the invariant functions, checked
//! through independent routes.

use mbpi::asymptotics::{self, FitSettings, FitWindow};
use mbpi::inversion::InversionSettings;
use mbpi::invariants::{self, MeasureKind};
use mbpi::kernel::{self, KernelSettings, Route};
use mbpi::laws::{make_stable_immigration, make_stable_offspring, ModelSpec, DEFAULT_TRUNCATION};
use mbpi::rvcalc::log_grid;
use mbpi::Complex64;

fn positive() -> ModelSpec {
    ModelSpec::stable(0.5, 1.0, 0.75, 0.25).unwrap()
}

fn negative() -> ModelSpec {
    ModelSpec::stable(0.75, 1.0, 0.5, 0.25).unwrap()
}

fn perturbed(nu: f64, delta: f64, kappa_f: f64, kappa_g: f64) -> ModelSpec {
    ModelSpec::new(
        make_stable_offspring(nu, 1.0, kappa_f, DEFAULT_TRUNCATION).unwrap(),
        make_stable_immigration(delta, 0.25, kappa_g, DEFAULT_TRUNCATION).unwrap(),
    )
    .unwrap()
}

fn points() -> Vec<Complex64> {
    vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.95, 0.0),
        Complex64::from_polar(0.9, 2.0),
        Complex64::from_polar(0.6, -0.7),
    ]
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn semigroup_of_the_offspring_flow() {
    let k = KernelSettings::default();
    for m in [positive(), perturbed(0.5, 0.75, 1.0, 0.0)] {
        for s in points() {
            for (t, u) in [(0.3, 0.7), (2.0, 5.0), (40.0, 100.0)] {
                let direct = kernel::solve_f(&m, t + u, s, &k).unwrap();
                let inner = kernel::solve_f(&m, u, s, &k).unwrap();
                let composed = kernel::solve_f(&m, t, inner.f, &k).unwrap();
                assert!(rel(composed.r, direct.r) < 1e-9, "s={s} t={t} u={u}");
            }
        }
    }
}

#[test]
fn immigration_factor_is_a_cocycle() {
    let k = KernelSettings::default();
    for m in [positive(), negative()] {
        for s in points() {
            let (t, u) = (1.5, 3.0);
            let whole = kernel::compute_p(&m, t + u, s, &k).unwrap();
            let first = kernel::compute_p(&m, u, s, &k).unwrap();
            let second = kernel::compute_p(&m, t, first.f, &k).unwrap();
            let sum = first.ln_p + second.ln_p;
            assert!((sum - whole.ln_p).norm() < 1e-9, "s={s}");
        }
    }
}

#[test]
fn space_and_time_routes_agree() {
    let k = KernelSettings::default();
    for m in [positive(), negative(), perturbed(0.5, 0.75, 1.0, 0.0), perturbed(0.75, 0.5, 0.0, 1.0)] {
        for s in points() {
            for t in [0.1, 1.0, 10.0, 100.0] {
                for i in [0, 3] {
                    let a = kernel::compute_p_i(&m, i, t, s, &k, Route::Space).unwrap();
                    let b = kernel::compute_p_i(&m, i, t, s, &k, Route::Time).unwrap();
                    assert!((a.ln_p - b.ln_p).norm() < 1e-9, "s={s} t={t} i={i}: {} vs {}", a.ln_p, b.ln_p);
                    assert!(rel(a.p, b.p) < 1e-9);
                }
            }
        }
    }
}

#[test]
fn invariant_functions_solve_their_functional_equation() {
    // U(F(t;s))·𝒫(t;s) = U(s) and ℬ(F(t;s))·𝒫(t;s) = e^{-T-shift}ℬ(s) are
    // tested only for U; π has no scalar identity here.
    let k = KernelSettings::default();
    let m = positive();
    for s in points() {
        for t in [0.5, 5.0, 50.0] {
            let g = kernel::compute_p(&m, t, s, &k).unwrap();
            let lhs = invariants::ln_u(&m, g.f, &k.quad).unwrap() + g.ln_p;
            let rhs = invariants::ln_u(&m, s, &k.quad).unwrap();
            assert!((lhs - rhs).norm() < 1e-9, "s={s} t={t}");
        }
    }
}

#[test]
fn u_matches_its_closed_form_on_the_canonical_model() {
    // U(s) = exp{-(1-s)^γ}
    let k = KernelSettings::default();
    let m = positive();
    for s in points() {
        let exact = (-(Complex64::new(1.0, 0.0) - s).powf(0.25)).exp();
        let u = invariants::compute_u(&m, s, &k.quad).unwrap();
        assert!(rel(u, exact) < 1e-10, "s={s}");
    }
}

#[test]
fn pi_matches_its_closed_form_on_the_canonical_model() {
    // π(s) = exp{(1-s)^{-|γ|}}
    let k = KernelSettings::default();
    let m = negative();
    for s in [0.0f64, 0.3, 0.5, 0.9] {
        let exact = (1.0 - s).powf(-0.25).exp();
        let pi = invariants::compute_pi(&m, Complex64::new(s, 0.0), &k.quad).unwrap();
        assert!((pi.re / exact - 1.0).abs() < 1e-10, "s={s}");
    }
}

#[test]
fn invariant_distribution_coefficients() {
    // Attainable parts of the distribution check: u_0 and positivity at J = 512,
    // and the mass that the first 512 terms leave in the tail is the one
    // predicted by u_j ~ j^{-1-γ}/(-Γ(-γ)).
    let inv = InversionSettings::default();
    let k = KernelSettings::default();
    let u = invariants::extract_measure(&positive(), MeasureKind::DistributionU, 512, &inv, &k.quad).unwrap();
    let v = u.values();
    assert!(u.series.max_clamp <= 1e-9);
    assert!((v[0] - (-1.0f64).exp()).abs() <= 1e-8);
    // u_1 = e^{-1}·γ
    assert!((v[1] - 0.25 * (-1.0f64).exp()).abs() <= 1e-8);
    let sum = u.series.sum();
    assert!(sum < 1.0 && sum > 0.8, "sum {sum}");
    // increasing J must bring the sum closer to one
    let wider = invariants::extract_measure(&positive(), MeasureKind::DistributionU, 4096, &InversionSettings { samples: 1 << 15, ..inv }, &k.quad).unwrap();
    assert!(wider.series.sum() > sum);
}

#[test]
fn transition_rows_are_substochastic_and_match_direct_coefficients() {
    let k = KernelSettings::default();
    let inv = InversionSettings::default();
    let m = positive();
    let rows = kernel::transition_rows(&m, 3, 1.0, 256, &k, &inv).unwrap();
    for (i, row) in rows.iter().enumerate() {
        let direct = kernel::transition_probs(&m, i as u32, 1.0, 256, &k, &inv).unwrap();
        for (a, b) in row.values.iter().zip(&direct.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let mass = row.sum();
        assert!(mass <= 1.0 + 1e-9 && mass > 0.9, "row {i} mass {mass}");
    }
    // p_00(t) = 𝒫(t;0)
    let p00 = kernel::compute_p(&m, 1.0, Complex64::new(0.0, 0.0), &k).unwrap().p.re;
    assert!((rows[0].values[0] - p00).abs() < 1e-10);
}

#[test]
fn rate_with_perturbed_immigration_intensity() {
    // With a second immigration term the leading correction no longer cancels
    // and the error falls off with the predicted exponent.
    let m = perturbed(0.75, 0.5, 0.0, 1.0);
    let fit = FitSettings {
        window: FitWindow::Full,
        ..Default::default()
    };
    let rep = asymptotics::rate_theorem2(&m, &[0.0, 0.5], &log_grid(1e2, 1e6, 5), &KernelSettings::default(), &fit).unwrap();
    assert!(rep.fit.passed, "{}", asymptotics::summary_line("perturbed", &rep.fit));
    assert!((rep.fit.predicted_slope + 1.0 / 3.0).abs() < 1e-12);
    let rep = asymptotics::rate_corollary1(&m, &log_grid(1e2, 1e6, 5), &KernelSettings::default(), &FitSettings { slope_tol: 0.15, ..fit }).unwrap();
    assert!(rep.fit.passed, "{}", asymptotics::summary_line("perturbed corollary", &rep.fit));
}

#[test]
fn canonical_rate_is_the_second_order_one() {
    // For the pure stable pair the first-order term vanishes and the error
    // decays like t^{-2μ/ν}.
    let m = negative();
    let fit = FitSettings {
        window: FitWindow::Full,
        ..Default::default()
    };
    let rep = asymptotics::rate_theorem2(&m, &[0.0], &log_grid(1e2, 1e6, 5), &KernelSettings::default(), &fit).unwrap();
    assert!((rep.fit.fitted_slope + 2.0 / 3.0).abs() < 0.05, "{}", rep.fit.fitted_slope);
    assert!(rep.fit.r_squared > 0.999);
}

#[test]
fn lemma1_deviation_decays() {
    let rep = asymptotics::check_lemma1(&positive(), &[0.0, 0.5, 0.9], &log_grid(10.0, 1e5, 2), &KernelSettings::default(), 1e-3).unwrap();
    assert!(rep.passed, "{:?}", rep.rows.last());
}

#[test]
fn precondition_errors() {
    let k = KernelSettings::default();
    let fit = FitSettings::default();
    let t = log_grid(1e2, 1e4, 2);
    let err = asymptotics::rate_theorem2(&positive(), &[0.0], &t, &k, &fit).unwrap_err();
    assert!(err.is_precondition());
    let err = asymptotics::rate_theorem1(&negative(), 0.0, &t, &k, &fit).unwrap_err();
    assert!(err.is_precondition());
    let err = invariants::extract_measure(&negative(), MeasureKind::DistributionU, 64, &InversionSettings::default(), &k.quad).unwrap_err();
    assert!(err.is_precondition());
}

#[test]
fn scaled_p00_matches_the_exact_formula_at_t100() {
    // e^{T(100)}p_00(100) = exp{75^{1/3} + 1 - 76^{1/3}} for the canonical negative pair
    let fit = FitSettings::default();
    let rep = asymptotics::rate_corollary1(&negative(), &[100.0, 300.0, 1000.0, 3000.0], &KernelSettings::default(), &fit).unwrap();
    let exact = (75f64.cbrt() + 1.0 - 76f64.cbrt()).exp();
    assert!((rep.scaled_p00[0] / exact - 1.0).abs() < 1e-8, "{} vs {exact}", rep.scaled_p00[0]);
    let e = std::f64::consts::E;
    assert!(rep.scaled_p00[0] > 0.95 * e && rep.scaled_p00[0] < 1.05 * e);
}

#[test]
fn row_mass_at_t5_is_the_truncated_part_of_a_unit_mass() {
    // p_0j(5) has a power-law tail, so the mass beyond J=512 is visible; extrapolate it
    let inv = InversionSettings::default();
    let row = kernel::transition_probs(&positive(), 0, 5.0, 512, &KernelSettings::default(), &inv).unwrap();
    let p = &row.values;
    let sum: f64 = p.iter().sum();
    assert!(sum < 1.0 && sum > 0.99, "{sum}");
    // local power-law exponent over the last octave
    let alpha = -(p[512] / p[256]).ln() / 2f64.ln();
    assert!(alpha > 1.0 && alpha < 2.0, "{alpha}");
    let a = p[512] * 512f64.powf(alpha);
    let tail = a * 512.5f64.powf(1.0 - alpha) / (alpha - 1.0);
    assert!((sum + tail - 1.0).abs() < 1e-3, "{sum} + {tail}");
}
