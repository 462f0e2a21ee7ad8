//! `mi-racah`: run the verification suites or emit polynomial tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mi_racah_core::verify::{run, table, Format, RunConfig};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "mi-racah", version, about = "Exact verification of multi-indexed (q-)Racah polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write a report.
    Verify(Options),
    /// Write coefficient, grid and spectrum tables.
    Table(Options),
}

/// Flags override the matching keys of the JSON config.
#[derive(Args)]
struct Options {
    /// JSON file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// racah or qracah.
    #[arg(long)]
    family: Option<String>,
    /// Lattice size.
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// Index set such as 1,2; "all" for every admissible set; "none" for D = {}.
    #[arg(long = "D")]
    index_set: Option<String>,
    /// Comma separated suite names or "all".
    #[arg(long)]
    checks: Option<String>,
    #[arg(long)]
    precision_bits: Option<usize>,
    /// Output file (verify, table json) or directory (table csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    allow_unvalidated: bool,
    /// Record per-check wall time in the report.
    #[arg(long)]
    timings: bool,
}

impl Options {
    fn config(&self) -> Result<RunConfig> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
                    Value::Object(m) => m,
                    _ => bail!("{} must hold a JSON object", path.display()),
                }
            }
            None => Map::new(),
        };
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                map.insert(key.to_string(), v);
            }
        };
        set("family", self.family.clone().map(Value::String));
        set("N", self.n.map(Value::from));
        set("b", self.b.clone().map(Value::String));
        set("c", self.c.clone().map(Value::String));
        set("d", self.d.clone().map(Value::String));
        set("q", self.q.clone().map(Value::String));
        set("D", self.index_set.clone().map(Value::String));
        set("checks", self.checks.clone().map(Value::String));
        set("precision_bits", self.precision_bits.map(Value::from));
        set("out", self.out.as_ref().map(|p| Value::String(p.display().to_string())));
        set("format", self.format.as_ref().map(|f| Value::String(f.to_ascii_lowercase())));
        set("allow_unvalidated", self.allow_unvalidated.then_some(Value::Bool(true)));
        set("timings", self.timings.then_some(Value::Bool(true)));
        serde_json::from_value(Value::Object(map)).context("invalid configuration")
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify(opts) => {
            let cfg = opts.config()?;
            let report = run(&cfg)?;
            emit(cfg.out.as_deref(), &report.render(cfg.format)?)?;
            let s = &report.summary;
            eprintln!("{}: {} pass, {} fail, {} skip", report.parameters, s.pass, s.fail, s.skip);
            for r in report.records.iter().filter(|r| r.status == mi_racah_core::verify::Status::Fail) {
                eprintln!("FAIL {} {}: {}", r.name, r.case, r.detail);
            }
            Ok(report.success())
        }
        Command::Table(opts) => {
            let cfg = opts.config()?;
            let files = table(&cfg)?.render(cfg.format)?;
            match cfg.format {
                Format::Json => emit(cfg.out.as_deref(), &files[0].1)?,
                Format::Csv => {
                    let dir = cfg.out.as_deref().context("csv tables need --out <directory>")?;
                    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    for (name, text) in &files {
                        emit(Some(&dir.join(name)), text)?;
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
