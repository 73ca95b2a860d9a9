//! `dispersim` subcommands. Exit codes: 0 pass, 1 check failure, 2 usage
//! or input error.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::engine::Placement;
use crate::runner::{self, RunRecord};
use crate::sweep::{self, Row, SweepSpec, CSV_HEADER};
use crate::trace::Trace;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dispersim", version, about = "Simulate and check robot dispersion on port-labeled grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configured simulation and all checks.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Result JSON path (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace JSON-lines path (overrides the config).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a parameter sweep and write sorted CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Re-check a stored trace against its config and result.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Stored result JSON (defaults to the config's result output).
        #[arg(long)]
        result: Option<PathBuf>,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let outcome = match cli.command {
        Command::Run { config, out, trace } => cmd_run(&config, out, trace),
        Command::Sweep { config, out, jobs } => cmd_sweep(&config, out.as_deref(), jobs),
        Command::Replay { config, trace, result, out } => cmd_replay(&config, &trace, result, out.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

/// Stdout that tolerates a closed pipe (`dispersim ... | head`).
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn append_row(path: &Path, row: &Row) -> Result<(), String> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut text = String::new();
    if fresh {
        text.push_str(CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&row.to_csv_line());
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(config: &Path, out: Option<PathBuf>, trace: Option<PathBuf>) -> Result<i32, String> {
    let cfg = RunConfig::load(config).map_err(|e| e.to_string())?;
    let ex = runner::execute(&cfg).map_err(|e| e.to_string())?;
    let record = &ex.record;
    let result_path = out.or_else(|| cfg.outputs.result.clone());
    let text = serde_json::to_string_pretty(record).expect("record serializes");
    match &result_path {
        Some(p) => write(p, &text)?,
        None => emit(&format!("{text}\n")),
    }
    if let Some(p) = trace.or_else(|| cfg.outputs.trace.clone()) {
        write(&p, &ex.trace.to_jsonl())?;
    }
    if let Some(p) = &cfg.outputs.csv {
        let seed = match cfg.robots.placement {
            Placement::Seeded { seed } | Placement::Clustered { seed, .. } => seed,
            _ => 0,
        };
        let adversary = cfg.adversary.label().replace(',', ";");
        append_row(p, &Row::from_record(record, adversary, seed))?;
    }
    let r = &record.result;
    eprintln!(
        "{} n={} k={} rounds={} dispersed={} crashes={} checks={}",
        r.protocol,
        r.n,
        r.k,
        r.rounds_used,
        r.dispersed,
        r.crashes,
        if record.passed() { "pass" } else { "FAIL" }
    );
    Ok(if record.passed() { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_sweep(config: &Path, out: Option<&Path>, jobs: usize) -> Result<i32, String> {
    let text = fs::read_to_string(config).map_err(|e| format!("{}: {e}", config.display()))?;
    let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| format!("invalid sweep spec: {e}"))?;
    let rows = sweep::run_sweep(&spec, jobs).map_err(|e| e.to_string())?;
    let csv = sweep::to_csv(&rows);
    match out {
        Some(p) => write(p, &csv)?,
        None => emit(&csv),
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed a check", rows.len());
        return Ok(EXIT_FAIL);
    }
    Ok(EXIT_PASS)
}

fn cmd_replay(config: &Path, trace: &Path, result: Option<PathBuf>, out: Option<&Path>) -> Result<i32, String> {
    let cfg = RunConfig::load(config).map_err(|e| e.to_string())?;
    let result_path = result
        .or_else(|| cfg.outputs.result.clone())
        .ok_or("no stored result: pass --result or set outputs.result")?;
    let stored: RunRecord = serde_json::from_str(&fs::read_to_string(&result_path).map_err(|e| format!("{}: {e}", result_path.display()))?)
        .map_err(|e| format!("{}: {e}", result_path.display()))?;
    let text = fs::read_to_string(trace).map_err(|e| format!("{}: {e}", trace.display()))?;
    let tr = Trace::from_jsonl(&text).map_err(|e| format!("{}: {e}", trace.display()))?;
    let digest = tr.digest_hex();
    if digest != stored.result.trace_digest {
        eprintln!("digest mismatch: trace {digest}, stored {}", stored.result.trace_digest);
        return Ok(EXIT_FAIL);
    }
    let report = runner::recheck(&cfg, &stored.result, &tr).map_err(|e| e.to_string())?;
    let same = report == stored.report;
    let body = serde_json::to_string_pretty(&json!({ "digest": digest, "matches_stored": same, "report": report })).expect("report serializes");
    match out {
        Some(p) => write(p, &body)?,
        None => emit(&format!("{body}\n")),
    }
    Ok(if report.passed() && same { EXIT_PASS } else { EXIT_FAIL })
}
