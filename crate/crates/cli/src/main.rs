//! `hpcli`: runs decoding-error experiments from TOML configs and writes
//! CSV series with a JSON sidecar describing how every row was produced.

mod config;
mod run;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hplab::fit::fit_power_law;
use serde_json::json;

use config::{ExperimentConfig, Mode};
use run::Table;

#[derive(Parser, Debug)]
#[command(name = "hpcli", version, about = "Hayden-Preskill decoding-error experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output path; CSV goes to stdout when absent.
    #[arg(long, global = true, env = "HPLAB_OUT")]
    out: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true, env = "HPLAB_SEED")]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "HPLAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact dense simulation.
    Exact(RunArgs),
    /// Haar-averaged domain-wall transfer matrix.
    Membrane(RunArgs),
    /// Monte-Carlo average over random Haar circuits.
    Mc(RunArgs),
    /// Closed-form predictions.
    Predict(RunArgs),
    /// Cartesian sweep over L, L_A, L_D.
    Sweep(RunArgs),
    /// Power-law fit of two CSV columns.
    Fit(FitArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, env = "HPLAB_CONFIG")]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Keep only rows with `column=value`; repeatable.
    #[arg(long = "filter", value_name = "COLUMN=VALUE")]
    filters: Vec<String>,
}

/// Error with a machine-readable kind, printed as JSON on stderr.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: "config", message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn classify(e: &anyhow::Error) -> &'static str {
    if let Some(c) = e.downcast_ref::<CliError>() {
        c.kind
    } else if let Some(h) = e.downcast_ref::<hplab::Error>() {
        h.kind()
    } else if e.downcast_ref::<io::Error>().is_some() {
        "io"
    } else if e.downcast_ref::<csv::Error>().is_some() {
        "csv"
    } else {
        "internal"
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", &e.render().to_string());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = classify(&e);
            report(kind, &format!("{e:#}"));
            match kind {
                "config" | "invalid-input" | "capacity" | "precondition" => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn report(kind: &str, message: &str) {
    let v = json!({ "error": { "kind": kind, "message": message.trim_end() } });
    eprintln!("{v}");
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let (mode, args) = match cli.command {
        Command::Exact(a) => (Mode::Exact, a),
        Command::Membrane(a) => (Mode::Membrane, a),
        Command::Mc(a) => (Mode::Mc, a),
        Command::Predict(a) => (Mode::Predict, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Fit(f) => return fit(&f, cli.out.as_deref()),
    };
    let cfg = config::load(&args.config)?;
    let seed = cli.seed.or(cfg.seed);
    let table = run::run(&cfg, mode, seed)?;
    let out = cli.out.or_else(|| cfg.output.clone());
    match out {
        Some(path) => {
            write_csv(File::create(&path).with_context(|| format!("creating {}", path.display()))?, &table)?;
            write_sidecar(&path, &cfg, mode, seed, &args.config, &table)?;
        }
        None => write_csv(io::stdout().lock(), &table)?,
    }
    Ok(())
}

fn write_csv<W: Write>(w: W, table: &Table) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(&table.columns)?;
    for r in &table.rows {
        wr.write_record(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// `<out>.meta.json` next to the CSV.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn write_sidecar(out: &Path, cfg: &ExperimentConfig, mode: Mode, seed: Option<u64>, src: &Path, table: &Table) -> Result<()> {
    let meta = json!({
        "tool": "hpcli",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": mode.tag(),
        "config_path": src.display().to_string(),
        "config": cfg,
        "seed": seed,
        "columns": table.columns,
        "rows": table.rows.len(),
        "points": table.points,
    });
    let path = sidecar_path(out);
    let mut f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, &meta)?;
    writeln!(f)?;
    Ok(())
}

fn fit(args: &FitArgs, out: Option<&Path>) -> Result<()> {
    let mut filters = HashMap::new();
    for f in &args.filters {
        let (k, v) = f.split_once('=').ok_or_else(|| CliError::config(format!("filter `{f}` is not COLUMN=VALUE")))?;
        filters.insert(k.to_string(), v.to_string());
    }
    let mut rd = csv::Reader::from_path(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let header = rd.headers()?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| CliError::config(format!("no column `{name}` in {}", args.input.display())))
    };
    let (ix, iy) = (col(&args.x)?, col(&args.y)?);
    let fcols: Vec<(usize, String)> = filters.iter().map(|(k, v)| Ok((col(k)?, v.clone()))).collect::<Result<_>>()?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec?;
        if fcols.iter().any(|(i, v)| &rec[*i] != v) {
            continue;
        }
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| CliError::config(format!("`{}` is not a number", &rec[i])).into())
        };
        xs.push(num(ix)?);
        ys.push(num(iy)?);
    }
    let r = fit_power_law(&xs, &ys)?;
    let v = json!({ "x": args.x, "y": args.y, "input": args.input.display().to_string(), "fit": r });
    let text = serde_json::to_string_pretty(&v)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
