use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const POSITIVE: &str = "\
[offspring]
family = stable
nu = 0.5
c = 1

[immigration]
family = stable
delta = 0.75
d = 0.25
";

const NEGATIVE: &str = "\
[offspring]
nu = 0.75
c = 1

[immigration]
delta = 0.5
d = 0.25
";

fn mbpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbpi")).args(args).output().expect("spawn mbpi")
}

fn run_config(dir: &Path, name: &str, text: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{name}.cfg"));
    fs::write(&cfg, text).unwrap();
    let out = dir.join(name);
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    mbpi(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_families_matches_golden_file() {
    let a = mbpi(&["list-families"]);
    let b = mbpi(&["list-families"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let golden = include_str!("golden/list_families.txt");
    assert_eq!(stdout(&a), golden);
    assert!(golden.contains("[f_nu] [L_nu]"));
    assert!(golden.contains("d/c = nu - delta"));
}

#[test]
fn rates_on_the_canonical_positive_family() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), "rates", &format!("{POSITIVE}\n[task]\nname = rates\n"), &[]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}{}", stderr(&o));
    let line = text.lines().find(|l| l.starts_with("theorem1 slope")).unwrap();
    assert!(line.starts_with("theorem1 slope -0.50"), "{line}");
    assert!(line.contains("(predicted -0.500)") && line.ends_with("PASS"), "{line}");
    let table = fs::read_to_string(dir.path().join("rates/rate_theorem1.csv")).unwrap();
    assert!(table.starts_with("t,error,predicted_envelope,ratio\n"));
    assert_eq!(table.lines().count(), 1 + 21);
    let summary = fs::read_to_string(dir.path().join("rates/summary.txt")).unwrap();
    assert_eq!(summary, text);
}

#[test]
fn missing_nu_is_a_config_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[offspring]\nc = 1\n\n[immigration]\ndelta = 0.75\nd = 0.25\n\n[task]\nname = validate\n";
    let o = run_config(dir.path(), "bad", text, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 1") && err.contains("`nu`"), "{err}");

    let o = run_config(dir.path(), "bad_value", &format!("{POSITIVE}\n[task]\nname = kernel\nt = 1,x\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 13"), "{}", stderr(&o));

    let o = run_config(dir.path(), "bad_task", &format!("{POSITIVE}\n[task]\nname = plot\n"), &[]);
    assert_eq!(o.status.code(), Some(2));

    let o = mbpi(&["run", dir.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preconditions_exit_three_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let critical = "[offspring]\nnu = 0.5\n\n[immigration]\ndelta = 0.5\nd = 0.5\n\n[task]\nname = validate\n";
    let o = run_config(dir.path(), "gamma0", critical, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("γ"));

    // C_L = 0.5 differs from |γ| = 0.25
    let mismatched = NEGATIVE.replace("d = 0.25", "d = 0.5");
    let o = run_config(dir.path(), "cl", &format!("{mismatched}\n[task]\nname = rates\n"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("C_𝖫"), "{}", stderr(&o));
    assert!(!dir.path().join("cl").exists());

    let o = run_config(dir.path(), "wrong_sign", &format!("{POSITIVE}\n[task]\nname = rates\nwhich = theorem2\n"), &[]);
    assert_eq!(o.status.code(), Some(3));
    let o = run_config(dir.path(), "lemma4", &format!("{NEGATIVE}\n[task]\nname = lemmas\nwhich = 4\n"), &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn skipped_checks_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{NEGATIVE}\n[task]\nname = lemmas\nwhich = 2,3\nlemma2_t = log:10:1e4:2\nlemma3_t = log:10:1e4:2\n");
    let o = run_config(dir.path(), "lemmas", &text, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("note skip lemma4: requires gamma > 0"));
}

#[test]
fn compare_reports_z_scores() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[task]\nname = compare\nhorizon = 2\nreplicates = 1000\nseed = 7\n\n[inversion]\nj_out = 64\nsamples = 1024\n",
        POSITIVE.replace("d = 0.25", "d = 0.25\ntruncation = 400").replace("c = 1", "c = 1\ntruncation = 400")
    );
    let o = run_config(dir.path(), "cmp", &text, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS compare sim vs kernel: max |z|"));
    let table = fs::read_to_string(dir.path().join("cmp/compare.csv")).unwrap();
    assert!(table.starts_with("j,p_kernel,p_hat,se,z,tested\n"));
    assert_eq!(table.lines().count(), 1 + 65);
    let tested = table.lines().filter(|l| l.ends_with(",true")).count();
    assert!(tested >= 2);
}

#[test]
fn manifest_reproduces_tables_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{POSITIVE}\n[task]\nname = simulate\ni = 1\nhorizon = 1\nreplicates = 3000\nseed = 5\n");
    let o = run_config(dir.path(), "first", &text, &[]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = fs::read_to_string(dir.path().join("first/manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 5") && manifest.contains("capped_fraction = 0"));
    assert!(manifest.contains("wall_clock_s = ") && manifest.contains("version = "));

    let o = run_config(dir.path(), "second", &manifest, &["--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = fs::read(dir.path().join("first/pmf.csv")).unwrap();
    let b = fs::read(dir.path().join("second/pmf.csv")).unwrap();
    assert_eq!(a, b);
    let hash = |p: &str| {
        let m = fs::read_to_string(dir.path().join(p)).unwrap();
        m.lines().find(|l| l.starts_with("config_sha256")).unwrap().to_string()
    };
    assert_eq!(hash("first/manifest.txt"), hash("second/manifest.txt"));
}

#[test]
fn seed_override_and_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{POSITIVE}\n[task]\nname = simulate\nhorizon = 1\nreplicates = 2000\nseed = 5\n");
    run_config(dir.path(), "base", &text, &["--threads", "1"]);
    run_config(dir.path(), "threads", &text, &["--threads", "3"]);
    run_config(dir.path(), "seeded", &text, &["--seed", "6"]);
    let read = |p: &str| fs::read_to_string(dir.path().join(p)).unwrap();
    assert_eq!(read("base/pmf.csv"), read("threads/pmf.csv"));
    assert_ne!(read("base/pmf.csv"), read("seeded/pmf.csv"));
    assert!(read("seeded/manifest.txt").contains("seed = 6"));
}

#[test]
fn strict_turns_warnings_into_failures() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{POSITIVE}\n[task]\nname = validate\ncolour = blue\n");
    let o = run_config(dir.path(), "lenient", &text, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("unused key [task] colour (line 13)"), "{}", stderr(&o));
    let o = run_config(dir.path(), "strict", &text, &["--strict"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_validation_exits_one_with_the_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[offspring]\nfamily = coefficients\nnu = 0.5\ncoefficients = 0.5,-1,0.6\n\n\
                [immigration]\nfamily = coefficients\ndelta = 0.75\ncoefficients = -1,0.6,0.4\n\n[task]\nname = validate\n";
    let o = run_config(dir.path(), "v", text, &[]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL offspring valid: failing: mass_balance"), "{out}");
    assert!(out.contains("PASS immigration valid"));
    let table = fs::read_to_string(dir.path().join("v/validation.csv")).unwrap();
    assert!(table.contains("offspring,mass_balance,"));

    // the same law is rejected up front by any other task
    let o = run_config(dir.path(), "k", &text.replace("name = validate", "name = kernel"), &[]);
    assert_eq!(o.status.code(), Some(3));
}
