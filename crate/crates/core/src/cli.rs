//! Command-line experiment runner.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::adorp::{default_threshold_grid, prepare_inputs, sweep, tune_threshold, AdorpEstimate};
use crate::config::{parse_config, render, ExperimentConfig, ExperimentKind, QTableBlock};
use crate::error::{invalid, Error};
use crate::netsim::{run_sim, EerRun};
use crate::qtable::{build_q_table, QGridConfig};
use crate::rng::{derive_key, substream, tag};
use crate::schemes::SchemeId;
use crate::validation::{validate_bounds, ValidationReport};

#[derive(Debug, Parser)]
#[command(name = "relaynet", version, about = "Relay-selection experiments for random ad-hoc networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Rate-progress density of several schemes along one parameter axis.
    AdorpSweep,
    /// Multi-hop network simulation.
    Netsim,
    /// Build the narrow-knowledge lookup table.
    BuildQtable,
    /// Check closed-form interference terms against quadrature.
    ValidateBounds,
    /// Grid-search the threshold scheme's power threshold.
    TuneThreshold,
}

impl Command {
    pub fn kind(self) -> ExperimentKind {
        match self {
            Command::AdorpSweep => ExperimentKind::AdorpSweep,
            Command::Netsim => ExperimentKind::Netsim,
            Command::BuildQtable => ExperimentKind::BuildQtable,
            Command::ValidateBounds => ExperimentKind::ValidateBounds,
            Command::TuneThreshold => ExperimentKind::TuneThreshold,
        }
    }
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output CSV path.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Use the preset for figure 3, 4, 5 or 6.
    #[arg(long, global = true, value_name = "N")]
    pub paper_figure: Option<u32>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub emit_config: bool,
    /// Scale the closed forms by 1 + X before validation (failure-path hook).
    #[arg(long, global = true, hide = true, value_name = "X")]
    pub corrupt_closed_form: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Run(Error),
    Io(std::io::Error),
    ValidationFailed(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(items) => {
                writeln!(f, "invalid configuration:")?;
                for i in items {
                    writeln!(f, "  {i}")?;
                }
                Ok(())
            }
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::ValidationFailed(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Result of a run: CSV text plus a human summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub summary: String,
    pub findings: Vec<String>,
    pub passed: bool,
}

pub const SWEEP_HEADER: &str = "experiment,scheme,axis,abscissa,value,stderr,realizations,seed";
pub const NETSIM_HEADER: &str = "scheme,p_tx,slots,generated,delivered,eer,seed";

pub fn sweep_row(out: &mut String, experiment: &str, axis: &str, abscissa: f64, e: &AdorpEstimate, seed: u64) {
    let _ = writeln!(
        out,
        "{experiment},{},{axis},{abscissa},{},{},{},{seed}",
        e.scheme, e.value, e.stderr, e.realizations
    );
}

pub fn netsim_row(out: &mut String, r: &EerRun) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        r.scheme, r.p_tx, r.slots, r.generated, r.delivered, r.eer, r.seed
    );
}

/// Resolves the configuration from flags: a figure preset, a file, or the
/// subcommand's defaults, then seed and output overrides.
pub fn resolve_config(command: Command, args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = if let Some(fig) = args.paper_figure {
        ExperimentConfig::paper_figure(fig)
            .ok_or_else(|| CliError::Config(vec![format!("no preset for figure {fig}; use 3, 4, 5 or 6")]))?
    } else if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        parse_config(&text).map_err(|errs| CliError::Config(errs.iter().map(|e| e.to_string()).collect()))?
    } else {
        ExperimentConfig::default_for(command.kind())
    };
    if cfg.experiment != command.kind() {
        return Err(CliError::Config(vec![format!(
            "configuration is for {}, not {}",
            cfg.experiment,
            command.kind()
        )]));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.display().to_string());
    }
    Ok(cfg)
}

pub fn run_config(cfg: &ExperimentConfig, corruption: f64) -> Result<RunOutput, CliError> {
    let params = cfg.network.params();
    let seed = cfg.seed;
    let mut csv = String::new();
    let mut passed = true;
    let mut findings = Vec::new();
    let summary = match cfg.experiment {
        ExperimentKind::AdorpSweep => {
            let s = cfg.sweep.as_ref().ok_or_else(|| invalid("sweep", "missing block"))?;
            let result = sweep(s.axis, &s.grid, &s.schemes, &params, &cfg.mc, seed)?;
            csv.push_str(SWEEP_HEADER);
            csv.push('\n');
            for p in &result.points {
                for e in &p.estimates {
                    sweep_row(&mut csv, "adorp-sweep", s.axis.name(), p.abscissa, e, seed);
                }
            }
            format!("{} points x {} schemes", result.points.len(), s.schemes.len())
        }
        ExperimentKind::TuneThreshold => {
            params.validate()?;
            let grid = cfg
                .tune
                .as_ref()
                .and_then(|t| t.grid.clone())
                .unwrap_or_else(|| default_threshold_grid(&params));
            let (best, all) = tune_threshold(&params, &grid, &cfg.mc, seed)?;
            csv.push_str(SWEEP_HEADER);
            csv.push('\n');
            for e in &all {
                sweep_row(&mut csv, "tune-threshold", "threshold", e.threshold.unwrap_or(0.0), e, seed);
            }
            format!("{} thresholds, best {best}", all.len())
        }
        ExperimentKind::Netsim => {
            let n = cfg.netsim.as_ref().ok_or_else(|| invalid("netsim", "missing block"))?;
            csv.push_str(NETSIM_HEADER);
            csv.push('\n');
            let mut runs = 0;
            for (k, &p_tx) in n.p_tx.iter().enumerate() {
                for &scheme in &n.schemes {
                    let run_seed = derive_key(seed, &[k as u64]);
                    let mut sim = n.sim_config(&cfg.network, scheme, p_tx, run_seed);
                    if scheme == SchemeId::Threshold && n.threshold.is_none() {
                        let inputs = prepare_inputs(&[scheme], &sim.params, &cfg.mc, run_seed)?;
                        sim.threshold = inputs.threshold;
                    }
                    let mut run = run_sim(&sim)?;
                    run.seed = seed;
                    netsim_row(&mut csv, &run);
                    runs += 1;
                }
            }
            format!("{runs} runs")
        }
        ExperimentKind::BuildQtable => {
            params.validate()?;
            let q = cfg.qtable.clone().unwrap_or_else(QTableBlock::default);
            let standard = QGridConfig::standard(&params);
            let grid = QGridConfig {
                x_min: q.x_min.unwrap_or(standard.x_min),
                x_max: q.x_max.unwrap_or(standard.x_max),
                points: q.points,
            };
            let mut rng = substream(seed, &[tag::QTABLE]);
            let table = build_q_table(&params, &grid, q.samples, &cfg.mc.field(&params)?, &mut rng)?;
            csv.push_str(&table.to_csv());
            format!(
                "{} knots, {} samples{}",
                table.grid.len(),
                table.mc_samples,
                if table.repaired { ", isotonic repair applied" } else { "" }
            )
        }
        ExperimentKind::ValidateBounds => {
            let v = cfg.validate.clone().unwrap_or_default();
            let report = validate_bounds(&v, seed, corruption)?;
            write_validation(&mut csv, &report);
            passed = report.passed();
            let failures = report.checks.iter().filter(|c| !c.passed).count();
            findings = report.findings.clone();
            format!(
                "{} geometries, {failures} failures, max relative error {:e}",
                report.checks.len(),
                report.max_rel_err()
            )
        }
    };
    Ok(RunOutput { csv, summary, findings, passed })
}

fn write_validation(out: &mut String, report: &ValidationReport) {
    out.push_str("alpha,lambda,p_tx,r_a,d,closed_form,quadrature,rel_err,passed\n");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.params.alpha, c.params.lambda, c.params.p_tx, c.params.r_a, c.d, c.closed_form, c.quadrature, c.rel_err, c.passed
        );
    }
}

/// Full command: resolve, run on the requested pool, write the CSV.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli.command, &cli.common)?;
    if cli.common.emit_config {
        print!("{}", render(&cfg));
        return Ok(());
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Run(invalid("workers", e.to_string())))?;
    let start = Instant::now();
    let corruption = cli.common.corrupt_closed_form.unwrap_or(0.0);
    let out = pool.install(|| run_config(&cfg, corruption))?;
    let path = cfg
        .output
        .clone()
        .unwrap_or_else(|| format!("{}.csv", cfg.experiment));
    fs::write(&path, &out.csv)?;
    println!(
        "{}: {}; wall time {:.3} s; seed {}; wrote {path}",
        cfg.experiment,
        out.summary,
        start.elapsed().as_secs_f64(),
        cfg.seed
    );
    for f in &out.findings {
        println!("finding: {f}");
    }
    if !out.passed {
        return Err(CliError::ValidationFailed(out.summary));
    }
    Ok(())
}

pub fn main_entry() -> std::process::ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
