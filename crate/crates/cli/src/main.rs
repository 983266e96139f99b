//! `dte`: design, boundaries, operating characteristics and type-I
//! recalibration for delayed-effect survival trials, driven by a TOML
//! configuration file.

mod config;
mod output;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;

use config::{apply_overrides, Overrides, RunConfig};
use dte_core::montecarlo::{adaptive_type_one_error, gsd_type_one_error, CellResult, Engine};
use dte_core::*;
use output::{fmt_f64, Emitter, Format, Manifest};

#[derive(Parser)]
#[command(
    name = "dte",
    about = "Design and Monte Carlo evaluation of survival trials with delayed treatment effects",
    version
)]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true, default_value = "dte.toml")]
    config: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicate-count override.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Worker-thread override (0 = all cores); never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample-size table over the (delay, weights) grid (deterministic).
    Design,
    /// Group-sequential look schedule: boundaries, alpha spent, crossing
    /// probabilities under the design-power drift (deterministic).
    Boundaries,
    /// Monte Carlo operating characteristics over the scenario grid.
    Simulate,
    /// Nominal-level recalibration so the empirical type-I error meets the
    /// configured level.
    Recalibrate,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            let text = format!("{e:#}");
            if text.contains("validation") || text.contains("parsing config") || text.contains("required")
            {
                2
            } else {
                1
            }
        }
    });
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::from_path(&cli.config)?;
    apply_overrides(
        &mut cfg,
        Overrides { seed: cli.seed, replicates: cli.replicates, workers: cli.workers },
    );
    if cfg.run.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    let emitter = Emitter::new(&cfg, &cli.out, cli.format)?;
    match cli.command {
        Command::Design => cmd_design(&cfg, &emitter),
        Command::Boundaries => cmd_boundaries(&cfg, &emitter),
        Command::Simulate => cmd_simulate(&cfg, &emitter),
        Command::Recalibrate => cmd_recalibrate(&cfg, &emitter),
    }
}

fn manifest(cfg: &RunConfig, command: &str, started: Instant) -> Manifest {
    Manifest {
        command: command.into(),
        seed: cfg.run.seed,
        replicates: cfg.run.replicates,
        workers: cfg.run.workers,
        version: env!("CARGO_PKG_VERSION"),
        timing_s: started.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DesignRow {
    delay: f64,
    rho: f64,
    gamma: f64,
    events: usize,
    patients: usize,
    e_star: f64,
    event_fraction: f64,
}

fn cmd_design(cfg: &RunConfig, emitter: &Emitter) -> Result<()> {
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for w in cfg.weight_specs()? {
        for &delay in &cfg.grid.delays {
            let spec = cfg.design_spec(w, delay)?;
            match hasegawa_sample_size(&spec) {
                Ok(ss) => rows.push(DesignRow {
                    delay,
                    rho: w.rho,
                    gamma: w.gamma,
                    events: ss.events,
                    patients: ss.patients,
                    e_star: ss.e_star,
                    event_fraction: ss.event_fraction,
                }),
                Err(e) => failures.push(format!("cell (delay={delay}, rho={}, gamma={}): {e}", w.rho, w.gamma)),
            }
        }
    }
    if !failures.is_empty() {
        bail!("{} cell(s) failed:\n  {}", failures.len(), failures.join("\n  "));
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.delay),
                fmt_f64(r.rho),
                fmt_f64(r.gamma),
                r.events.to_string(),
                r.patients.to_string(),
                fmt_f64(r.e_star),
                fmt_f64(r.event_fraction),
            ]
        })
        .collect();
    let paths = emitter.emit(
        "design",
        &["delay", "rho", "gamma", "events", "patients", "e_star", "event_fraction"],
        &csv_rows,
        &rows,
        &manifest(cfg, "design", started),
    )?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// boundaries
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BoundaryRow {
    look: usize,
    information_fraction: f64,
    cumulative_alpha: f64,
    boundary_z: f64,
    crossing_probability: f64,
}

fn cmd_boundaries(cfg: &RunConfig, emitter: &Emitter) -> Result<()> {
    let started = Instant::now();
    let schedule =
        obf_with_power(&cfg.design.look_fractions, cfg.design.alpha, cfg.design.beta)?;
    let crossing = schedule.crossing_probabilities.clone().unwrap();
    let rows: Vec<BoundaryRow> = (0..schedule.fractions.len())
        .map(|k| BoundaryRow {
            look: k + 1,
            information_fraction: schedule.fractions[k],
            cumulative_alpha: schedule.cumulative_alpha[k],
            boundary_z: schedule.boundaries[k],
            crossing_probability: crossing[k],
        })
        .collect();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.look.to_string(),
                fmt_f64(r.information_fraction),
                fmt_f64(r.cumulative_alpha),
                fmt_f64(r.boundary_z),
                fmt_f64(r.crossing_probability),
            ]
        })
        .collect();
    let paths = emitter.emit(
        "boundaries",
        &["look", "information_fraction", "cumulative_alpha", "boundary_z", "crossing_probability"],
        &csv_rows,
        &rows,
        &manifest(cfg, "boundaries", started),
    )?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn rule_label(cfg: &RunConfig) -> String {
    match &cfg.adaptive {
        None => "group-sequential".to_string(),
        Some(a) => {
            let rule = serde_json::to_string(&a.rule).unwrap().replace('"', "");
            format!("{rule} cp_min={}", a.cp_min)
        }
    }
}

fn cell_csv_row(c: &CellResult, rule: &str) -> Vec<String> {
    vec![
        fmt_f64(c.delay),
        fmt_f64(c.rho),
        fmt_f64(c.gamma),
        rule.to_string(),
        fmt_f64(c.rejection_rate),
        fmt_f64(c.mc_se),
        fmt_f64(c.interim_stop_rate),
        fmt_f64(c.resize_frequency),
        fmt_f64(c.mean_resize_ratio),
        fmt_f64(c.mean_patient_ratio),
        fmt_f64(c.mean_final_events),
        c.planned_patients.to_string(),
        c.planned_events.to_string(),
        c.pathological.to_string(),
        c.replicates.to_string(),
    ]
}

const OC_HEADER: [&str; 15] = [
    "delay",
    "rho",
    "gamma",
    "rule",
    "power_or_alpha",
    "mc_se",
    "interim_stop_rate",
    "resize_freq",
    "mean_resize_ratio",
    "mean_patient_ratio",
    "mean_events",
    "planned_patients",
    "planned_events",
    "pathological",
    "replicates",
];

#[derive(Serialize)]
struct OcRow {
    rule: String,
    #[serde(flatten)]
    cell: CellResult,
}

fn cmd_simulate(cfg: &RunConfig, emitter: &Emitter) -> Result<()> {
    let started = Instant::now();
    let base = cfg.scenario_base()?;
    let grid = cfg.scenario_grid()?;

    // pre-validate every cell's sizing so failures are enumerated up front
    let mut failures = Vec::new();
    let mut planned_events = None;
    for &w in &grid.weights {
        for &delay in &grid.delays {
            let sizing_delay = match grid.sizing {
                dte_core::SizingPolicy::FixedAtZeroDelay => 0.0,
                dte_core::SizingPolicy::ResizedPerDelay => delay,
            };
            match cfg
                .design_spec(w, sizing_delay)
                .and_then(|s| Ok(hasegawa_sample_size(&s)?))
            {
                Ok(ss) => planned_events = Some(ss.events as f64),
                Err(e) => failures.push(format!(
                    "cell (delay={delay}, rho={}, gamma={}): {e}",
                    w.rho, w.gamma
                )),
            }
        }
    }
    if !failures.is_empty() {
        bail!("{} cell(s) failed:\n  {}", failures.len(), failures.join("\n  "));
    }

    let engine = match cfg.adaptive_config(planned_events.unwrap()) {
        Some(a) => Engine::Adaptive(a),
        None => Engine::GroupSequential,
    };
    let cells = estimate_oc(&grid, &base, &engine, cfg.run.replicates, cfg.run.seed)?;
    let rule = rule_label(cfg);
    let csv_rows: Vec<Vec<String>> = cells.iter().map(|c| cell_csv_row(c, &rule)).collect();
    let rows: Vec<OcRow> =
        cells.into_iter().map(|cell| OcRow { rule: rule.clone(), cell }).collect();
    let paths = emitter.emit(
        "oc",
        &OC_HEADER,
        &csv_rows,
        &rows,
        &manifest(cfg, "simulate", started),
    )?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// recalibrate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RecalRow {
    rho: f64,
    gamma: f64,
    rule: String,
    target: f64,
    nominal_alpha: f64,
    achieved: f64,
    evaluations: u32,
    note: String,
}

fn cmd_recalibrate(cfg: &RunConfig, emitter: &Emitter) -> Result<()> {
    let started = Instant::now();
    let base = cfg.scenario_base()?;
    let target = cfg.design.alpha;
    let tol = cfg.run.recalibration_tolerance;
    let rule = rule_label(cfg);
    let mut rows = Vec::new();
    for w in cfg.weight_specs()? {
        let recal = match &cfg.adaptive {
            None => recalibrate_alpha(
                |a| gsd_type_one_error(&base, w, 0.0, a, cfg.run.replicates, cfg.run.seed),
                target,
                tol,
                16,
            )?,
            Some(_) => {
                let spec = cfg.design_spec(w, 0.0)?;
                let planned = hasegawa_sample_size(&spec)?.events as f64;
                let acfg = cfg.adaptive_config(planned).unwrap();
                recalibrate_alpha(
                    |a| {
                        adaptive_type_one_error(
                            &base,
                            &acfg,
                            w,
                            0.0,
                            a,
                            cfg.run.replicates,
                            cfg.run.seed,
                        )
                    },
                    target,
                    tol,
                    16,
                )?
            }
        };
        rows.push(RecalRow {
            rho: w.rho,
            gamma: w.gamma,
            rule: rule.clone(),
            target,
            nominal_alpha: recal.nominal_alpha,
            achieved: recal.achieved,
            evaluations: recal.evaluations,
            note: recal.note.unwrap_or_default(),
        });
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.rho),
                fmt_f64(r.gamma),
                r.rule.clone(),
                fmt_f64(r.target),
                fmt_f64(r.nominal_alpha),
                fmt_f64(r.achieved),
                r.evaluations.to_string(),
                format!("\"{}\"", r.note),
            ]
        })
        .collect();
    let paths = emitter.emit(
        "recalibration",
        &["rho", "gamma", "rule", "target", "nominal_alpha", "achieved", "evaluations", "note"],
        &csv_rows,
        &rows,
        &manifest(cfg, "recalibrate", started),
    )?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}
