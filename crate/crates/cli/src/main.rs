//! `wpme`: audits weighted Poincare inequalities and runs the weighted porous
//! medium solver from JSON configs.
//!
//! Exit status: 0 when a result was computed (including a failing
//! inequality), 1 on any error, 2 when a verdict is inconclusive.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use wpme::scenarios::SCENARIOS;
use wpme::weights::catalog::catalog;

use commands::Outcome;
use config::{AuditConfig, Config, FitConfig, FitForm, ScenarioConfig};
use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(
    name = "wpme",
    version,
    about = "Weighted porous medium solver and Poincare auditor"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON experiment config; its `command` must match the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: wpme-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Recorded in the MANIFEST.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Decide the Poincare inequalities for a weight pair.
    Audit {
        /// Catalog entry name.
        #[arg(long, conflicts_with = "catalog")]
        entry: Option<String>,
        /// Audit every catalog entry.
        #[arg(long)]
        catalog: bool,
    },
    /// Solve one problem and write trajectory, summary and bound outputs.
    Solve,
    /// Run a named reproduction scenario.
    Scenario {
        name: Option<String>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Truncation length.
        #[arg(long = "L")]
        length: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        r0: Option<f64>,
        /// Datum amplitude factor.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Solve over the cross product of parameter values.
    Sweep,
    /// Fit a power or exponential law to a CSV series.
    Fit {
        /// CSV file with a `t` column.
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long, value_enum)]
        form: Option<FitForm>,
        /// Column to fit [default: norm2].
        #[arg(long)]
        column: Option<String>,
        /// Time window as `LO,HI`.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
    },
    /// List catalog entries and scenario names.
    List,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Audit { .. } => "audit",
            Cmd::Solve => "solve",
            Cmd::Scenario { .. } => "scenario",
            Cmd::Sweep => "sweep",
            Cmd::Fit { .. } => "fit",
            Cmd::List => "list",
        }
    }
}

fn load_config(cli: &Cli) -> Result<Option<Config>> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let cfg = Config::load(path)?;
    if cfg.command() != cli.cmd.name() {
        bail!(
            "config is for `{}`, not `{}`",
            cfg.command(),
            cli.cmd.name()
        );
    }
    Ok(Some(cfg))
}

fn list() {
    println!("catalog entries:");
    for e in catalog() {
        println!("  {}", e.name);
    }
    println!("scenarios:");
    for s in SCENARIOS {
        println!("  {s}");
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Cmd::List = cli.cmd {
        list();
        return Ok(Outcome::Computed);
    }
    let cfg = load_config(&cli)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.out().cloned()))
        .unwrap_or_else(|| PathBuf::from("wpme-out"));
    let seed = cli
        .seed
        .or_else(|| cfg.as_ref().and_then(Config::seed))
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()?;

    let mut man = Manifest::create(&out, cli.cmd.name(), seed)?;
    let result = dispatch(cli.cmd, cfg, &mut man);
    match &result {
        Ok(_) => man.finish(true, None)?,
        Err(e) => man.finish(false, Some(&format!("{e:#}")))?,
    }
    result
}

fn dispatch(cmd: Cmd, cfg: Option<Config>, man: &mut Manifest) -> Result<Outcome> {
    match cmd {
        Cmd::Audit { entry, catalog } => {
            let mut c = match cfg {
                Some(Config::Audit(c)) => c,
                _ => AuditConfig::default(),
            };
            if entry.is_some() {
                c.entry = entry;
            }
            if catalog {
                commands::run_audit_catalog(&c, man)
            } else {
                commands::run_audit(&c, man)
            }
        }
        Cmd::Solve => match cfg {
            Some(Config::Solve(s)) => commands::run_solve(&s, man),
            _ => bail!("solve needs --config"),
        },
        Cmd::Scenario {
            name,
            m,
            beta,
            length,
            cells,
            r0,
            scale,
        } => {
            let c = match cfg {
                Some(Config::Scenario(c)) => c,
                _ => ScenarioConfig::default(),
            };
            let Some(name) = name.or(c.name) else {
                bail!("scenario name missing; one of {}", SCENARIOS.join(", "));
            };
            let mut o = c.overrides;
            o.m = m.or(o.m);
            o.beta = beta.or(o.beta);
            o.length = length.or(o.length);
            o.cells = cells.or(o.cells);
            o.r0 = r0.or(o.r0);
            o.scale = scale.or(o.scale);
            commands::run_scenario(&name, &o, man)
        }
        Cmd::Sweep => match cfg {
            Some(Config::Sweep(s)) => commands::run_sweep(&s, man),
            _ => bail!("sweep needs --config"),
        },
        Cmd::Fit {
            series,
            form,
            column,
            window,
        } => {
            let mut c = match cfg {
                Some(Config::Fit(c)) => c,
                _ => FitConfig::default(),
            };
            c.series = series.or(c.series);
            c.form = form.or(c.form);
            c.column = column.or(c.column);
            match window.as_deref() {
                None => {}
                Some([lo, hi]) => c.window = Some((*lo, *hi)),
                Some(_) => bail!("--window takes two values, LO,HI"),
            }
            commands::run_fit(&c, man)
        }
        Cmd::List => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Computed) => ExitCode::SUCCESS,
        Ok(Outcome::Inconclusive) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
