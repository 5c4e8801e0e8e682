mod commands;
mod config;
mod table;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ehstore::validate::{run as run_checks, ValidateOptions};

use config::{ExperimentConfig, Format, SimRun};
use table::Table;

#[derive(Parser, Debug)]
#[command(name = "ehstore", version, about = "Stored-energy statistics and link metrics of an on-off wireless powered node")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (otherwise CSV goes to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Base seed of the simulations.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Counted slots per simulated grid point.
    #[arg(long, global = true)]
    slots: Option<u64>,

    /// Skip Monte Carlo checks in `validate`.
    #[arg(long, global = true)]
    fast: bool,

    /// Scale the atom (and so the whole density) before validating.
    #[arg(long, global = true, hide = true)]
    perturb_atom: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form distribution parameters and link metrics over the grid.
    Analyze,
    /// Closed forms next to Monte Carlo estimates and agreement flags.
    Simulate,
    /// Buffer-size sweep (2 to N draws, then infinite) at each delta.
    Sweep {
        #[arg(long, default_value_t = 40)]
        max_sections: u32,
    },
    /// Outage-minimizing delta per buffer.
    Optimize,
    /// Run the self-check suite.
    Validate,
}

struct Sink {
    dir: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn emit(&self, table: &Table, stem: &str) -> Result<()> {
        match &self.dir {
            Some(dir) => table.write(dir, stem, self.format.csv(), self.format.json()),
            None => {
                let mut out = std::io::stdout().lock();
                if self.format.csv() {
                    out.write_all(table.to_csv().as_bytes())?;
                } else {
                    writeln!(out, "{}", serde_json::to_string_pretty(&table.to_json())?)?;
                }
                Ok(())
            }
        }
    }

    fn extra(&self, name: &str, text: &str) -> Result<()> {
        if let Some(dir) = &self.dir {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load(cli.config.as_deref())?;
    let sink = Sink {
        dir: cli.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from)),
        format: cli.format.unwrap_or(cfg.output.format),
    };
    if let Command::Validate = cli.command {
        let opts = ValidateOptions {
            fast: cli.fast,
            seed: cli.seed.unwrap_or(1),
            atom_factor: cli.perturb_atom.unwrap_or(1.0),
        };
        let checks = run_checks(&opts);
        let pass = checks.iter().all(|c| c.pass);
        for c in &checks {
            println!("check {}: {} - {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        }
        println!("validate: {}", if pass { "PASS" } else { "FAIL" });
        let report = serde_json::json!({ "schema": "validate.v1", "pass": pass, "checks": checks });
        sink.extra("validate.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
        return Ok(pass);
    }

    let resolved = cfg.resolve()?;
    match cli.command {
        Command::Analyze => sink.emit(&commands::analyze(&resolved), "analyze")?,
        Command::Simulate => {
            let mut run = resolved.sim.clone().unwrap_or_default();
            if resolved.sim.is_none() && cli.slots.is_none() {
                bail!("the configuration is analytic-only; pass --slots to simulate anyway");
            }
            if let Some(s) = cli.slots {
                run.slots = s;
            }
            if let Some(s) = cli.seed {
                run.seed = s;
            }
            let table = commands::simulate_grid(&resolved, &SimRun { ..run })?;
            sink.emit(&table, "simulate")?;
            if sink.format.csv() {
                for (name, csv) in commands::histogram_files(&table) {
                    sink.extra(&format!("histograms/{name}"), &csv)?;
                }
            }
        }
        Command::Sweep { max_sections } => {
            if max_sections < 2 {
                bail!("--max-sections must be at least 2");
            }
            sink.emit(&commands::sweep_buffers(&resolved, max_sections), "sweep")?;
        }
        Command::Optimize => {
            let table = commands::optimize(&resolved);
            sink.emit(&table, "optimize")?;
            if let Some(note) = commands::optimum_note(&table) {
                eprintln!("{note}");
                sink.extra("optimize.note", &(note + "\n"))?;
            }
        }
        Command::Validate => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
