//! Command-line front end: `run`, `gen` and `verify`.
//!
//! Each command returns its process exit code: 0 on success, 1 when a
//! verification fails, 2 for unreadable or malformed input, 3 when the
//! engine aborts (the transcript prefix is still written).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::agents::SFormula;
use crate::error::Error;
use crate::io::{allocation_from_text, allocation_to_text, generate, Instance};
use crate::protocol::{run, Config, RunOutcome, Transcript};
use crate::verify::verify_all;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Tolerance for the floating-point cross-check.
pub const CROSSCHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "chorediv", version, about = "Exact envy-free chore division")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Divide the cake for an instance file.
    Run(RunArgs),
    /// Write a seeded random instance.
    Gen(GenArgs),
    /// Check an allocation and transcript against an instance.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub instance: PathBuf,
    /// Allocation output [default: <instance stem>.alloc.txt]
    #[arg(long)]
    pub allocation: Option<PathBuf>,
    /// Transcript output [default: <instance stem>.log]
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Audit the run after it finishes.
    #[arg(long)]
    pub verify: bool,
    /// Cap on passes, opening division included [default: n(n-1)+2]
    #[arg(long)]
    pub max_rounds: Option<usize>,
    #[arg(long, default_value = "aside")]
    pub s_formula: SFormula,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, short)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Most segments per player density.
    #[arg(long, default_value_t = 4)]
    pub budget: usize,
    /// Output path [default: stdout]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub transcript: PathBuf,
    pub allocation: PathBuf,
}

pub fn main_with(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Run(args) => cmd_run(&args, out, err),
        Command::Gen(args) => cmd_gen(&args, out, err),
        Command::Verify(args) => cmd_verify(&args, out, err),
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn sibling(instance: &Path, suffix: &str) -> PathBuf {
    let stem = instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    instance.with_file_name(format!("{stem}{suffix}"))
}

fn load_instance(path: &Path) -> Result<Instance, String> {
    Instance::from_text(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

/// Human-readable run summary.
pub fn summary(instance: &Instance, outcome: &RunOutcome) -> String {
    let stats = &outcome.stats;
    let n = instance.n();
    let mut out = format!("instance: {}\nplayers: {n}\n", instance.label);
    if stats.settled_at_opening {
        out.push_str("outcome: settled at Step 3\n");
    } else {
        out.push_str(&format!("outcome: envy-free after {} passes\n", stats.passes));
    }
    out.push_str(&format!(
        "rounds: {} (bound {})\n",
        stats.passes,
        n * (n - 1) + 1
    ));
    out.push_str(&format!(
        "cuts: {} knife cuts in {} cut events\n",
        outcome.transcript.knife_cuts(),
        outcome.transcript.cut_events()
    ));
    let pairs: Vec<String> = stats.ia_pairs.iter().map(|(i, j)| format!("({i}, {j})")).collect();
    out.push_str(&format!("ia pairs: {}\n", if pairs.is_empty() { "none".into() } else { pairs.join(" ") }));
    let join = |v: &[u64]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
        }
    };
    out.push_str(&format!("r values: {}\n", join(&stats.r_values)));
    out.push_str(&format!("s values: {}\n", join(&stats.s_values)));
    out
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let instance = match load_instance(&args.instance) {
        Ok(i) => i,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_INPUT;
        }
    };
    let alloc_path = args
        .allocation
        .clone()
        .unwrap_or_else(|| sibling(&args.instance, ".alloc.txt"));
    let log_path = args
        .transcript
        .clone()
        .unwrap_or_else(|| sibling(&args.instance, ".log"));
    let config = Config {
        s_formula: args.s_formula,
        max_passes: args.max_rounds,
    };
    let outcome = match run(instance.players.clone(), config) {
        Ok(o) => o,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.error);
            if matches!(failure.error, Error::Input(_) | Error::Parse(_)) {
                return EXIT_INPUT;
            }
            match write(&log_path, &failure.transcript.to_text()) {
                Ok(()) => {
                    let _ = writeln!(err, "transcript prefix written to {}", log_path.display());
                }
                Err(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                }
            }
            return EXIT_INTERNAL;
        }
    };
    let written = write(&alloc_path, &allocation_to_text(&outcome.allocation, &instance.players))
        .and_then(|_| write(&log_path, &outcome.transcript.to_text()));
    if let Err(msg) = written {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_INPUT;
    }
    let _ = write!(out, "{}", summary(&instance, &outcome));
    let _ = writeln!(out, "allocation: {}", alloc_path.display());
    let _ = writeln!(out, "transcript: {}", log_path.display());
    if args.verify {
        match verify_all(
            &outcome.allocation,
            &outcome.transcript,
            &instance.players,
            CROSSCHECK_TOLERANCE,
        ) {
            Ok(verdict) => {
                let _ = write!(out, "{}", verdict.to_text());
                if !verdict.passed() {
                    return EXIT_REJECTED;
                }
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INTERNAL;
            }
        }
    }
    EXIT_OK
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let instance = match generate(args.n, args.seed, args.budget) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let text = instance.to_text();
    match &args.output {
        Some(path) => {
            if let Err(msg) = write(path, &text) {
                let _ = writeln!(err, "error: {msg}");
                return EXIT_INPUT;
            }
        }
        None => {
            let _ = write!(out, "{text}");
        }
    }
    EXIT_OK
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = (|| {
        let instance = load_instance(&args.instance)?;
        let transcript = Transcript::from_text(&read(&args.transcript)?)
            .map_err(|e| format!("{}: {e}", args.transcript.display()))?;
        let allocation = allocation_from_text(&read(&args.allocation)?)
            .map_err(|e| format!("{}: {e}", args.allocation.display()))?;
        Ok::<_, String>((instance, transcript, allocation))
    })();
    let (instance, transcript, allocation) = match loaded {
        Ok(v) => v,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_INPUT;
        }
    };
    let verdict = match verify_all(&allocation, &transcript, &instance.players, CROSSCHECK_TOLERANCE) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let _ = write!(out, "{}", verdict.to_text());
    if verdict.passed() {
        let _ = writeln!(out, "verified");
        EXIT_OK
    } else {
        let mut failed: Vec<&str> = verdict.audit.failed_checks().into_iter().collect();
        if !verdict.partition {
            failed.push("partition");
        }
        if !verdict.envy.is_envy_free() {
            failed.push("envy-free");
        }
        if !verdict.replay_matches {
            failed.push("replay-matches-allocation");
        }
        if !verdict.crosscheck {
            failed.push("numeric-crosscheck");
        }
        let _ = writeln!(err, "verification failed: {}", failed.join(", "));
        EXIT_REJECTED
    }
}
