//! Command implementations behind the `mofjsp` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mofjsp::decompose::{run_iterative, IterativeConfig};
use mofjsp::instance::{parse_named, Instance};
use mofjsp::samplers::{SamplerConfig, SamplerKind, Sampler};
use mofjsp::schedule::{check_feasible, evaluate, Schedule};
use mofjsp::LagrangeParams;

use crate::config::{ObjectiveSet, SweepConfig};
use crate::error::{CliError, Result};
use crate::report::{aggregate, export, PlotOptions};
use crate::sweep::{read_runs_with_timings, run_sweep, write_sweep, SweepOptions};

#[derive(Debug, Parser)]
#[command(name = "mofjsp", version, about = "Multi-objective flexible job shop scheduling via binary quadratic models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance with one parameter tuple.
    Solve(SolveArgs),
    /// Run a full-factorial sweep from a config file.
    Sweep(SweepArgs),
    /// Aggregate an existing runs.csv into fronts, metrics and plots.
    Report(ReportArgs),
    /// Check a schedule CSV against an instance.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file (Brandimarte text format).
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value = "f1+f2")]
    pub objectives: String,
    #[arg(long, default_value = "csa")]
    pub sampler: String,
    /// TOML file with sampler settings (the `[sampler]` table layout).
    #[arg(long)]
    pub sampler_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub t_est: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 100.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100.0)]
    pub zeta: f64,
    #[arg(long, default_value_t = 3)]
    pub j_s: usize,
    #[arg(long, default_value_t = 3)]
    pub o_s: usize,
    #[arg(long, default_value_t = 4)]
    pub retries: usize,
    /// Write the schedule CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a Gantt chart SVG here.
    #[arg(long)]
    pub gantt: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep config (TOML).
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Write scatter and Gantt SVGs.
    #[arg(long)]
    pub plots: bool,
    /// Keep runs already recorded in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// runs.csv from a sweep; timings.csv next to it is picked up.
    pub runs: PathBuf,
    /// Output directory; defaults to the directory of `runs`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Objective set; defaults to the one recorded in the runs.
    #[arg(long)]
    pub objectives: Option<String>,
    /// Instance for Gantt charts of front schedules.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Schedule CSV with columns job,op,machine,start,duration (0-based).
    #[arg(long)]
    pub schedule: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_named(&read(path)?, &name).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn parse_sampler(name: &str) -> Result<SamplerKind> {
    SamplerKind::parse(name).ok_or_else(|| CliError::Config(format!("unknown sampler {name:?}")))
}

pub fn solve(args: &SolveArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let instance = read_instance(&args.instance)?;
    let objectives: ObjectiveSet = args.objectives.parse()?;
    let kind = parse_sampler(&args.sampler)?;
    let sampler_cfg = match &args.sampler_config {
        Some(path) => toml::from_str::<SamplerConfig>(&read(path)?).map_err(|e| CliError::Config(e.to_string()))?,
        None => SamplerConfig::default(),
    };
    sampler_cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let params = objectives.mask(LagrangeParams {
        alpha: args.alpha,
        beta: args.beta,
        gamma: args.gamma,
        delta: args.delta,
        epsilon: args.epsilon,
        zeta: args.zeta,
    });
    let cfg = IterativeConfig {
        params,
        weights: objectives.default_weights(),
        j_s: args.j_s,
        o_s: args.o_s,
        t_est: args.t_est,
        retries: args.retries,
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let sampler = Sampler::new(kind, sampler_cfg);
    let result = run_iterative(&instance, &cfg, &sampler, args.seed).map_err(|e| match e {
        mofjsp::decompose::DecomposeError::SolveFailed { .. } => CliError::NoFeasible(e.to_string()),
        mofjsp::decompose::DecomposeError::Sampler(mofjsp::samplers::SamplerError::BackendUnavailable) => {
            CliError::Config(e.to_string())
        }
        other => CliError::NoFeasible(other.to_string()),
    })?;
    let io = |e| CliError::io("<stdout>", e);
    for t in &result.trace {
        writeln!(out, "# {t}").map_err(io)?;
    }
    let obj = evaluate(&result.schedule, &instance).map_err(|e| CliError::NoFeasible(e.to_string()))?;
    write!(out, "{}", result.schedule.to_csv()).map_err(io)?;
    writeln!(out, "e_f1={} e_f2={} e_f3={}", obj.makespan, obj.workload, obj.priority).map_err(io)?;
    if let Some(path) = &args.out {
        write(path, &result.schedule.to_csv())?;
    }
    if let Some(path) = &args.gantt {
        write(path, &result.schedule.gantt_svg(&instance, &instance.name))?;
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let mut cfg = SweepConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.output {
        cfg.output = o.clone();
    }
    if let Some(i) = &args.instance {
        cfg.instance = i.clone();
    }
    cfg.plots |= args.plots;
    cfg.validate()?;
    let opts = SweepOptions { resume: args.resume, external: None };
    let result = run_sweep(&cfg, &opts)?;
    write_sweep(&result, &cfg.output)?;
    let feasible = result.records.iter().filter(|r| r.feasible).count();
    let io = |e| CliError::io("<stdout>", e);
    writeln!(
        out,
        "{} runs ({} resumed), {} feasible, output in {}",
        result.records.len(),
        result.resumed,
        feasible,
        cfg.output.display()
    )
    .map_err(io)?;
    let agg = aggregate(&result.records, cfg.objectives)?;
    let instance = crate::sweep::load_instance(&cfg)?;
    let plots = cfg.plots.then_some(PlotOptions { instance: Some(&instance) });
    export(&agg, &cfg.output, plots)?;
    print_table(&agg, out)
}

fn print_table(agg: &crate::report::Aggregate, out: &mut dyn std::io::Write) -> Result<()> {
    let io = |e| CliError::io("<stdout>", e);
    for (m, t) in agg.table.algorithms.iter().zip(&agg.times) {
        let time = t
            .front_runs
            .as_ref()
            .map_or("-".to_string(), |s| format!("{:.3}±{:.3}s", s.mean, s.std));
        writeln!(
            out,
            "{}: runs={} feasible={} front={} hvr={} time={}",
            m.algorithm,
            m.runs,
            m.feasible_runs,
            m.front_size,
            m.hvr.map_or("-".to_string(), |v| format!("{v:.4}")),
            time
        )
        .map_err(io)?;
    }
    for c in &agg.table.coverage {
        writeln!(out, "C({}, {}) = {:.4}", c.a, c.b, c.value).map_err(io)?;
    }
    Ok(())
}

pub fn report(args: &ReportArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let records = read_runs_with_timings(&args.runs)?;
    let objectives = match &args.objectives {
        Some(s) => s.parse()?,
        None => records
            .first()
            .map(|r| r.objectives)
            .ok_or_else(|| CliError::Config("runs file has no records".into()))?,
    };
    let outdir = args
        .output
        .clone()
        .unwrap_or_else(|| args.runs.parent().map(Path::to_path_buf).unwrap_or_default());
    let agg = aggregate(&records, objectives)?;
    let instance = args.instance.as_deref().map(read_instance).transpose()?;
    let plots = args.plots.then_some(PlotOptions { instance: instance.as_ref() });
    export(&agg, &outdir, plots)?;
    print_table(&agg, out)
}

/// Returns whether the schedule is feasible.
pub fn validate(args: &ValidateArgs, out: &mut dyn std::io::Write) -> Result<bool> {
    let instance = read_instance(&args.instance)?;
    let schedule = Schedule::from_csv(&read(&args.schedule)?, &instance).map_err(|e| CliError::Format {
        path: args.schedule.clone(),
        message: e.to_string(),
    })?;
    let violations = check_feasible(&schedule, &instance);
    let io = |e| CliError::io("<stdout>", e);
    if violations.is_empty() {
        let obj = evaluate(&schedule, &instance).map_err(|e| CliError::NoFeasible(e.to_string()))?;
        writeln!(out, "feasible e_f1={} e_f2={} e_f3={}", obj.makespan, obj.workload, obj.priority).map_err(io)?;
        Ok(true)
    } else {
        for v in &violations {
            writeln!(out, "{v}").map_err(io)?;
        }
        Ok(false)
    }
}

/// Runs a parsed command and maps the outcome to an exit code.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32 {
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Report(a) => report(a, out),
        Command::Validate(a) => match validate(a, out) {
            Ok(true) => Ok(()),
            Ok(false) => Err(CliError::NoFeasible("schedule violates constraints".into())),
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => crate::error::EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
