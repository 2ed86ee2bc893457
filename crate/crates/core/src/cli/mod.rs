//! Batch front end: reads an experiment config, runs computations and verification suites
//! and writes report rows.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a computation errors,
//! 2 for usage and configuration errors.

pub mod config;
pub mod experiments;
pub mod grammar;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::fieldexpr::{parse_with, Var};
use crate::surface::{QuotientSurface, SurfaceKind};
use config::{Experiment, ExperimentConfig};
use experiments::{Settings, Task};
use grammar::Context;
use report::Row;

#[derive(Debug, Parser)]
#[command(name = "areaflux", version, about = "Flux, Calabi and Euler-cocycle invariants on surfaces")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of worker threads.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Tolerance applied to every check, overriding config and defaults.
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
    /// Seed for generated test inputs (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Records)]
    pub format: Format,
    /// Fill the `timing` field with wall-clock seconds (makes output run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Records,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one invariant.
    Compute {
        #[command(subcommand)]
        what: ComputeKind,
    },
    /// Run a verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Run a worked construction.
    Demo {
        #[arg(value_enum)]
        name: DemoKind,
        /// Local Calabi invariant of the input map.
        #[arg(long)]
        target: Option<f64>,
    },
    /// List available objects.
    List {
        #[arg(value_enum)]
        what: ListKind,
    },
    /// Run every experiment of the config.
    Run,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SurfaceArgs {
    /// Surface kind, overriding the config.
    #[arg(long, value_enum)]
    pub surface: Option<KindArg>,
    /// Strip half-width, overriding the config.
    #[arg(long)]
    pub w: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ComputeKind {
    /// λ-flux of a map.
    Flux {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, value_name = "SPEC")]
        map: Option<String>,
        #[arg(long, value_name = "SPEC")]
        lambda: Option<String>,
    },
    /// Local Calabi invariant on a patch (Calabi invariant on the disk).
    Calabi {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, value_name = "SPEC")]
        map: Option<String>,
        /// `x0,x1,y0,y1`
        #[arg(long, allow_hyphen_values = true, value_parser = parse_patch)]
        patch: Option<[f64; 4]>,
        #[arg(long, allow_hyphen_values = true)]
        e_sign: Option<f64>,
    },
    /// Swept area of an arc under an isotopy, against its λ-flux.
    SweptArea {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, value_name = "SPEC")]
        arc: Option<String>,
        #[arg(long, value_name = "SPEC")]
        isotopy: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Cocycle,
    Transgression,
    Flows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    CellDivision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ListKind {
    Surfaces,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Disk,
    Annulus,
    Mobius,
}

impl From<KindArg> for SurfaceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Disk => SurfaceKind::Disk,
            KindArg::Annulus => SurfaceKind::Annulus,
            KindArg::Mobius => SurfaceKind::Mobius,
        }
    }
}

fn parse_patch(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 numbers, got {}", v.len()))
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

/// Runs a parsed command line, writing the report to `out`. `Ok(pass)` tells whether every
/// check passed; `Err` is a usage or configuration error.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<bool, String> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let src = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            ExperimentConfig::from_toml(&src).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    let io = |e: std::io::Error| e.to_string();
    let experiments: Vec<Experiment> = match &cli.command {
        Command::List { what: ListKind::Surfaces } => {
            list_surfaces(cli.format, out).map_err(io)?;
            return Ok(true);
        }
        Command::Run => {
            if cfg.experiments.is_empty() {
                return Err("`run` needs a config with at least one [[experiment]]".into());
            }
            cfg.experiments.clone()
        }
        Command::Compute { what } => {
            let (surface, from_flags) = match what {
                ComputeKind::Flux { surface, map, lambda } => (
                    surface,
                    (map.is_some() || lambda.is_some())
                        .then(|| Experiment::Flux { name: None, map: map.clone(), lambda: lambda.clone() }),
                ),
                ComputeKind::Calabi { surface, map, patch, e_sign } => (
                    surface,
                    (map.is_some() || patch.is_some() || e_sign.is_some()).then(|| Experiment::Calabi {
                        name: None,
                        map: map.clone(),
                        patch: *patch,
                        e_sign: *e_sign,
                    }),
                ),
                ComputeKind::SweptArea { surface, arc, isotopy } => (
                    surface,
                    (arc.is_some() || isotopy.is_some())
                        .then(|| Experiment::SweptArea { name: None, arc: arc.clone(), isotopy: isotopy.clone() }),
                ),
            };
            if let Some(k) = surface.surface {
                cfg.surface.kind = k.into();
            }
            if let Some(w) = surface.w {
                cfg.surface.w = Some(w);
            }
            let kind = match what {
                ComputeKind::Flux { .. } => "flux",
                ComputeKind::Calabi { .. } => "calabi",
                ComputeKind::SweptArea { .. } => "swept-area",
            };
            select(&cfg, kind, from_flags)
        }
        Command::Verify { suite } => {
            let kind = match suite {
                Suite::Cocycle => "cocycle",
                Suite::Transgression => "transgression",
                Suite::Flows => "flows",
            };
            select(&cfg, kind, None)
        }
        Command::Demo { name: DemoKind::CellDivision, target } => {
            let flags = target.map(|t| Experiment::CellDivision { name: None, target: Some(t) });
            select(&cfg, "cell-division", flags)
        }
    };
    let settings = settings(&cfg, cli)?;
    let prefixes = prefixes(&experiments);
    let mut all: Vec<Task> = Vec::new();
    for (i, (e, prefix)) in experiments.iter().zip(&prefixes).enumerate() {
        let tasks = experiments::tasks(e, prefix, &settings).map_err(|m| format!("experiment {i} ({prefix}): {m}"))?;
        all.extend(tasks);
    }
    let mut rows = Vec::new();
    let mut pass = true;
    let format = cli.format;
    execute(all, cli.jobs as usize, cli.timing, |batch| {
        for r in batch {
            pass &= r.pass;
            if format == Format::Records {
                writeln!(out, "{}", report::record_line(&r)).map_err(io)?;
            }
            rows.push(r);
        }
        out.flush().map_err(io)
    })?;
    if format == Format::Table {
        write!(out, "{}", report::table(&rows, cli.timing)).map_err(io)?;
    }
    Ok(pass)
}

/// The config's experiments of one kind, or the one built from flags, or the default.
fn select(cfg: &ExperimentConfig, kind: &str, from_flags: Option<Experiment>) -> Vec<Experiment> {
    if let Some(e) = from_flags {
        return vec![e];
    }
    let matching: Vec<Experiment> = cfg.experiments.iter().filter(|e| e.kind() == kind).cloned().collect();
    if matching.is_empty() {
        vec![Experiment::default_of(kind).expect("known kind")]
    } else {
        matching
    }
}

/// Row prefixes: the experiment name or kind, numbered when not unique.
fn prefixes(experiments: &[Experiment]) -> Vec<String> {
    let base: Vec<String> =
        experiments.iter().map(|e| e.name().map_or_else(|| e.kind().to_string(), str::to_string)).collect();
    base.iter()
        .enumerate()
        .map(|(i, b)| {
            if base.iter().filter(|x| *x == b).count() > 1 {
                let k = base[..i].iter().filter(|x| *x == b).count();
                format!("{b}#{k}")
            } else {
                b.clone()
            }
        })
        .collect()
}

fn settings(cfg: &ExperimentConfig, cli: &Cli) -> Result<Settings, String> {
    let sb = &cfg.surface;
    let surface = match sb.kind {
        SurfaceKind::Disk => QuotientSurface::disk(),
        k => QuotientSurface::new(k, sb.w.unwrap_or(0.5)).map_err(|e| format!("[surface]: {e}"))?,
    };
    let mut fields = BTreeMap::new();
    for (name, src) in &cfg.fields {
        if Var::from_name(name).is_some() || name.is_empty() {
            return Err(format!("[fields]: `{name}` is not a usable field name"));
        }
        let e = parse_with(src, &Var::ALL).map_err(|e| format!("[fields] {name}: {e}"))?;
        fields.insert(name.clone(), e);
    }
    let epsilon = sb.epsilon.unwrap_or(0.125);
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(format!("[surface]: epsilon = {epsilon} must lie in (0, 1/2)"));
    }
    if let Some(t) = cli.tol {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(format!("--tol {t} must be a non-negative number"));
        }
    }
    Ok(Settings {
        ctx: Context { surface, fields, steps: cfg.integrator.steps, collar_depth: sb.collar_depth, epsilon },
        integrator: cfg.integrator.clone(),
        tolerances: cfg.tolerances.clone(),
        tol: cli.tol,
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
    })
}

/// Runs tasks on up to `jobs` threads and hands their rows to `sink` in task order.
pub fn execute(
    tasks: Vec<Task>,
    jobs: usize,
    timing: bool,
    mut sink: impl FnMut(Vec<Row>) -> Result<(), String>,
) -> Result<(), String> {
    let n = tasks.len();
    let queue: Mutex<Vec<Option<Task>>> = Mutex::new(tasks.into_iter().map(Some).collect());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Vec<Row>)>();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            let tx = tx.clone();
            let (queue, next) = (&queue, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let task = queue.lock().unwrap()[i].take().expect("each task runs once");
                let start = Instant::now();
                let mut rows = task();
                if timing {
                    let t = start.elapsed().as_secs_f64();
                    rows.iter_mut().for_each(|r| r.timing = Some(t));
                }
                if tx.send((i, rows)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        for (i, rows) in rx {
            pending.insert(i, rows);
            while let Some(rows) = pending.remove(&emitted) {
                sink(rows)?;
                emitted += 1;
            }
        }
        Ok(())
    })
}

fn list_surfaces(format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    let rows: Vec<[String; 4]> = SurfaceKind::ALL
        .iter()
        .map(|k| {
            let (deck, orientable, w) = match k {
                SurfaceKind::Disk => ("none", true, "-"),
                SurfaceKind::Annulus => ("(x, y) -> (x + 1, y)", true, "0.5"),
                SurfaceKind::Mobius => ("(x, y) -> (x + 1, -y)", false, "0.5"),
            };
            [k.name().to_string(), deck.to_string(), orientable.to_string(), w.to_string()]
        })
        .collect();
    match format {
        Format::Records => {
            for [name, deck, orientable, w] in rows {
                let v = serde_json::json!({
                    "surface": name,
                    "deck": deck,
                    "orientable": orientable == "true",
                    "default_w": if w == "-" { serde_json::Value::Null } else { serde_json::json!(0.5) },
                });
                writeln!(out, "{v}")?;
            }
        }
        Format::Table => {
            writeln!(out, "{:<9}{:<24}{:<12}default_w", "surface", "deck", "orientable")?;
            for [name, deck, orientable, w] in rows {
                writeln!(out, "{name:<9}{deck:<24}{orientable:<12}{w}")?;
            }
        }
    }
    Ok(())
}
