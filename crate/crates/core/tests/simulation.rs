use mbpi::inversion::InversionSettings;
use mbpi::kernel::{self, KernelSettings};
use mbpi::laws::ModelSpec;
use mbpi::sim::{self, SimConfig};

fn canonical() -> ModelSpec {
    ModelSpec::stable(0.5, 1.0, 0.75, 0.25).unwrap().truncated()
}

#[test]
fn p00_indicator_matches_the_kernel() {
    let m = canonical();
    let inv = InversionSettings {
        samples: 1 << 10,
        ..Default::default()
    };
    let p00 = kernel::transition_probs(&m, 0, 5.0, 16, &KernelSettings::default(), &inv).unwrap().values[0];
    let r = sim::estimate_pmf(&SimConfig::new(m, 0, 5.0, 100_000, 11)).unwrap();
    let se = (p00 * (1.0 - p00) / r.kept() as f64).sqrt();
    assert!((r.p_hat(0) - p00).abs() <= 3.0 * se, "{} vs {p00}", r.p_hat(0));
}

#[test]
fn cap_at_1e4_is_rarely_hit() {
    let mut cfg = SimConfig::new(canonical(), 0, 5.0, 20_000, 3);
    cfg.state_cap = 10_000;
    let r = sim::estimate_pmf(&cfg).unwrap();
    assert!(r.capped_fraction() < 1e-3, "{}", r.capped_fraction());
}

#[test]
fn doubling_replicates_shrinks_standard_errors() {
    let m = canonical();
    let small = sim::estimate_pmf(&SimConfig::new(m.clone(), 0, 5.0, 20_000, 21)).unwrap();
    let large = sim::estimate_pmf(&SimConfig::new(m, 0, 5.0, 40_000, 22)).unwrap();
    let states = 0..20;
    let mean = |r: &sim::SimResult| states.clone().map(|j| r.se(j)).sum::<f64>() / states.len() as f64;
    let ratio = mean(&large) / mean(&small);
    assert!((ratio * 2f64.sqrt() - 1.0).abs() <= 0.05, "{ratio}");
}
