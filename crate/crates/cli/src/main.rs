//! `mbpi` batch runner.
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed (or a runtime warning
//! under `--strict`), 2 config error, 3 precondition violated, 4 numeric failure.

mod config;
mod families;
mod tasks;

use clap::{Parser, Subcommand};
use config::{build_model, model_keys, Params, Task, SECTIONS};
use mbpi::textfmt::{Document, Section};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use tasks::{Ctx, Outcome};

#[derive(Parser)]
#[command(name = "mbpi", version, about = "Branching processes with immigration: kernels, invariant measures, rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Simulation seed (overrides `[task] seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// List the built-in law families and their conditions.
    ListFamilies,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Core(#[from] mbpi::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(mbpi::Error::Parse { .. }) | Failure::Read { .. } => 2,
            Failure::Core(e) if e.is_precondition() => 3,
            Failure::Core(_) | Failure::Write { .. } => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    match &cli.command {
        Command::ListFamilies => {
            print!("{}", families::LISTING);
            ExitCode::SUCCESS
        }
        Command::Run { config } => match run(&cli, config) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code())
            }
        },
    }
}

/// Warnings about the config itself; fatal as exit 2 under `--strict`.
fn config_warnings(doc: &Document) -> Vec<String> {
    let mut out = Vec::new();
    for s in &doc.sections {
        if s.name == "manifest" {
            continue;
        }
        if !SECTIONS.contains(&s.name.as_str()) {
            out.push(format!("unknown section [{}] (line {})", s.name, s.line));
            continue;
        }
        if s.name == "offspring" || s.name == "immigration" {
            for e in &s.entries {
                if !model_keys(&s.name).contains(&e.key.as_str()) {
                    out.push(format!("unused key [{}] {} (line {})", s.name, e.key, e.line));
                }
            }
        }
        if s.name == "output" {
            for e in s.entries.iter().filter(|e| e.key != "dir") {
                out.push(format!("unused key [output] {} (line {})", e.key, e.line));
            }
        }
    }
    out
}

fn run(cli: &Cli, path: &Path) -> Result<u8, Failure> {
    let started = Instant::now();
    let text = std::fs::read_to_string(path).map_err(|source| Failure::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: Document = text.parse()?;
    let task_section = doc.require("task")?;
    let kind: Task = task_section.parse_required("name")?;
    let mut warnings = config_warnings(&doc);
    let model = build_model(&doc, kind != Task::Validate)?;

    let empty = Section::default();
    let mut ctx = Ctx {
        model: &model,
        task: Params::new(task_section, "task"),
        inversion: Params::new(doc.section("inversion").unwrap_or(&empty), "inversion"),
        fit: Params::new(doc.section("fit").unwrap_or(&empty), "fit"),
        seed_override: cli.seed,
    };
    ctx.task.resolved.push("name", kind);
    let outcome = tasks::run(kind, &mut ctx)?;
    let unused = ctx.task.unused().into_iter().chain(ctx.inversion.unused()).chain(ctx.fit.unused());
    warnings.extend(unused.map(|k| format!("unused key {k}")));

    let [off, imm] = model.to_sections();
    let mut resolved = Document {
        sections: vec![off, imm, ctx.task.resolved],
    };
    for s in [ctx.inversion.resolved, ctx.fit.resolved] {
        if !s.entries.is_empty() {
            resolved.sections.push(s);
        }
    }
    let resolved_text = resolved.render();
    let hash: String = Sha256::digest(resolved_text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();

    let out_dir = match &cli.out {
        Some(dir) => dir.clone(),
        None => doc.section("output").and_then(|s| s.get("dir")).map_or_else(|| PathBuf::from("mbpi-out"), PathBuf::from),
    };
    std::fs::create_dir_all(&out_dir).map_err(|source| Failure::Write {
        path: out_dir.clone(),
        source,
    })?;

    let config_clean = warnings.is_empty();
    let runtime_clean = outcome.warnings.is_empty();
    let all_pass = outcome.verdicts.iter().all(|v| v.passed);
    let code = if cli.strict && !config_clean {
        2
    } else if !all_pass || (cli.strict && !runtime_clean) {
        1
    } else {
        0
    };

    let write = |name: &str, contents: &str| {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|source| Failure::Write { path, source })
    };
    for (name, contents) in &outcome.tables {
        write(name, contents)?;
    }
    let summary = summary(kind, &hash, &outcome, &warnings, code);
    write("summary.txt", &summary)?;

    let mut manifest = Section::new("manifest");
    manifest.push("tool", "mbpi");
    manifest.push("version", env!("CARGO_PKG_VERSION"));
    manifest.push("config_file", path.display());
    manifest.push("config_sha256", &hash);
    manifest.push("threads", rayon::current_num_threads());
    manifest.push("strict", cli.strict);
    for (k, v) in &outcome.manifest {
        manifest.push(k, v);
    }
    manifest.push("tables", outcome.tables.iter().map(|t| t.0.as_str()).collect::<Vec<_>>().join(","));
    manifest.push("exit_code", code);
    manifest.push("wall_clock_s", format!("{:.3}", started.elapsed().as_secs_f64()));
    let header = Document { sections: vec![manifest] }.render();
    write("manifest.txt", &format!("{header}\n{resolved_text}"))?;

    print!("{summary}");
    for w in warnings.iter().chain(&outcome.warnings) {
        eprintln!("warning: {w}");
    }
    Ok(code)
}

fn summary(kind: Task, hash: &str, outcome: &Outcome, config_warnings: &[String], code: u8) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "task {kind} config {}", &hash[..16]);
    for v in &outcome.verdicts {
        if v.detail.is_empty() {
            // the name already carries the verdict
            let _ = writeln!(s, "{}", v.name);
        } else {
            let _ = writeln!(s, "{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
    }
    for n in &outcome.notes {
        let _ = writeln!(s, "note {n}");
    }
    for w in config_warnings.iter().chain(&outcome.warnings) {
        let _ = writeln!(s, "warning {w}");
    }
    let passed = outcome.verdicts.iter().filter(|v| v.passed).count();
    let _ = writeln!(
        s,
        "verdict {} ({passed}/{} passed, exit {code})",
        if code == 0 { "PASS" } else { "FAIL" },
        outcome.verdicts.len()
    );
    s
}
