//! Command-line front end. Exit codes: 0 clean, 1 warnings or notes in the
//! journal, 2 critical divergence or failed check, 3 usage or input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::graphs::{bounded_cases, to_dot, validate_graph, GraphCatalog};
use crate::mock::{generate_trace, SimConfig};
use crate::policy::universe::Bounds;
use crate::replay::{journal_to_jsonl, replay_trace, CoverageReport, ReplayResult, Severity, Status};
use crate::trace::{read_trace, write_trace, Trace, TraceError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOTES: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "tracecheck", version, about = "Check syscall traces against an access-control model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replay traces and journal every divergence from the model.
    Replay {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Write journal entries of all traces to this JSONL file.
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Write the merged coverage report to this JSON file.
        #[arg(long)]
        coverage: Option<PathBuf>,
        /// Treat warnings as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Run the simulated kernel and write the trace it produces.
    Generate { config: PathBuf, out: PathBuf },
    /// Check a syscall graph's structure and determinism.
    ValidateGraph {
        /// Graph name, or `all`.
        name: String,
        /// Print the graph in Graphviz format instead of validating it.
        #[arg(long)]
        dot: bool,
    },
    /// Merge coverage reports (or replay traces) and check the guard
    /// conjunct fraction.
    Coverage {
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.8)]
        min: f64,
    },
}

/// Exit code for one replay.
pub fn exit_code(result: &ReplayResult, strict: bool) -> i32 {
    match (result.status, result.max_severity()) {
        (Status::Failure, _) | (_, Some(Severity::Crit)) => EXIT_FAILURE,
        (_, Some(Severity::Warn)) if strict => EXIT_FAILURE,
        (_, Some(_)) => EXIT_NOTES,
        (_, None) => EXIT_OK,
    }
}

/// Parses `argv` (program name first) and runs the command against `catalog`.
pub fn run<I, T>(argv: I, catalog: &GraphCatalog, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Replay {
            traces,
            journal,
            coverage,
            strict,
        } => cmd_replay(&traces, journal.as_deref(), coverage.as_deref(), strict, catalog, out),
        Command::Generate { config, out: path } => cmd_generate(&config, &path, out),
        Command::ValidateGraph { name, dot } => cmd_validate(&name, dot, catalog, out),
        Command::Coverage { files, min } => cmd_coverage(&files, min, catalog, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn load(path: &Path) -> Result<Trace, String> {
    read_trace(path).map_err(|e| match e {
        TraceError::Io { .. } => e.to_string(),
        other => format!("{}: {other}", path.display()),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_replay(
    traces: &[PathBuf],
    journal: Option<&Path>,
    coverage: Option<&Path>,
    strict: bool,
    catalog: &GraphCatalog,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let mut code = EXIT_OK;
    let mut entries = Vec::new();
    let mut merged = CoverageReport::for_catalog(catalog);
    for path in traces {
        let name = path.display();
        let trace = load(path)?;
        let result = replay_trace(&trace, catalog).map_err(|e| format!("{name}: {e}"))?;
        for e in &result.journal {
            writeln!(out, "{name}: {e}").map_err(|e| e.to_string())?;
        }
        writeln!(
            out,
            "{name}: {:?} after {} of {} calls, {} journal {}",
            result.status,
            result.calls_processed,
            trace.calls.len(),
            result.journal.len(),
            if result.journal.len() == 1 { "entry" } else { "entries" }
        )
        .map_err(|e| e.to_string())?;
        code = code.max(exit_code(&result, strict));
        merged.merge(&result.coverage);
        entries.extend(result.journal);
    }
    if let Some(p) = journal {
        write_file(p, &journal_to_jsonl(&entries))?;
    }
    if let Some(p) = coverage {
        write_file(p, &merged.to_json())?;
    }
    Ok(code)
}

fn cmd_generate(config: &Path, path: &Path, out: &mut dyn Write) -> Result<i32, String> {
    let cfg = SimConfig::load(config).map_err(|e| e.to_string())?;
    let generated = generate_trace(&cfg).map_err(|e| e.to_string())?;
    write_trace(path, &generated.trace).map_err(|e| e.to_string())?;
    writeln!(
        out,
        "wrote {} calls to {}",
        generated.trace.calls.len(),
        path.display()
    )
    .map_err(|e| e.to_string())?;
    for (i, f) in cfg.faults.iter().enumerate() {
        match generated.seq_of(i) {
            Some(seq) => writeln!(out, "fault {i} ({:?}) fired at seq {seq}", f.kind),
            None => writeln!(out, "fault {i} ({:?}) never fired", f.kind),
        }
        .map_err(|e| e.to_string())?;
    }
    Ok(EXIT_OK)
}

fn cmd_validate(name: &str, dot: bool, catalog: &GraphCatalog, out: &mut dyn Write) -> Result<i32, String> {
    let graphs: Vec<_> = if name == "all" {
        catalog.graphs().collect()
    } else {
        vec![catalog.get(name).map_err(|e| e.to_string())?]
    };
    let mut code = EXIT_OK;
    for g in graphs {
        if dot {
            write!(out, "{}", to_dot(g)).map_err(|e| e.to_string())?;
            continue;
        }
        let cases = bounded_cases(g, &Bounds::default());
        let defects = validate_graph(g, cases.iter());
        if defects.is_empty() {
            writeln!(out, "{}: ok ({} cases)", g.syscall, cases.len())
        } else {
            code = EXIT_FAILURE;
            defects
                .iter()
                .try_for_each(|d| writeln!(out, "{}: {d}", g.syscall))
        }
        .map_err(|e| e.to_string())?;
    }
    Ok(code)
}

fn cmd_coverage(files: &[PathBuf], min: f64, catalog: &GraphCatalog, out: &mut dyn Write) -> Result<i32, String> {
    if files.is_empty() {
        return Err("no coverage reports or traces given".into());
    }
    let mut merged = CoverageReport::for_catalog(catalog);
    for path in files {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let report = match CoverageReport::from_json(&text) {
            Ok(r) => r,
            Err(_) => {
                let trace = load(path)?;
                replay_trace(&trace, catalog)
                    .map_err(|e| format!("{}: {e}", path.display()))?
                    .coverage
            }
        };
        merged.merge(&report);
    }
    let fraction = merged.conjunct_fraction();
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| e.to_string());
    w(out, format!("guard conjuncts: {:.3}", fraction))?;
    w(out, format!("graph nodes: {:.3}", merged.node_fraction()))?;
    w(out, format!("invariants: {:.3}", merged.invariant_fraction()))?;
    for (name, counts) in merged.uncovered_conjuncts() {
        w(out, format!("  uncovered {name}: held {}, failed {}", counts.held, counts.failed))?;
    }
    Ok(if fraction >= min { EXIT_OK } else { EXIT_FAILURE })
}
