use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use conjsynth::campaign::{emit_report, run_campaign_with_progress, Campaign, CampaignAlgorithm, ReportFormat};
use conjsynth::config::{parse_seeds, resolve_scenario};
use conjsynth::models::{builtin_scenarios, horizon_warning};
use conjsynth::stl::{boolean_sat, parse_formula, robustness, Trace};

#[derive(Parser)]
#[command(name = "synth", version, about = "Find inputs that satisfy every conjunct of an STL requirement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-seed campaign on a scenario.
    Run(RunArgs),
    /// List the built-in scenarios.
    ListScenarios,
    /// Robustness of a recorded trace.
    Eval {
        /// CSV with a leading `time` column.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        spec: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Cmaes,
    Mcr,
    McrAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum)]
    algo: Algo,
    /// Objective conjunct for `mcr`, counted from 1.
    #[arg(long)]
    objective: Option<usize>,
    /// `a..b`, or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    /// Simulations per trial.
    #[arg(long)]
    budget: Option<usize>,
    /// Seconds per trial.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    lambda: Option<usize>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Run trials concurrently.
    #[arg(long)]
    parallel: bool,
    /// Print per-generation progress to standard error.
    #[arg(long, short)]
    verbose: bool,
}

/// Bad input, reported with exit code 2.
#[derive(Debug)]
struct ConfigFailure(anyhow::Error);

fn build_campaign(args: &RunArgs) -> anyhow::Result<Campaign> {
    let loaded = resolve_scenario(&args.scenario)?;
    if let Some(w) = horizon_warning(&loaded.scenario.input, &loaded.scenario.spec) {
        eprintln!("warning: {w}");
    }
    let d = &loaded.defaults;
    let algorithm = match args.algo {
        Algo::Cmaes => CampaignAlgorithm::Cmaes,
        Algo::Mcr => CampaignAlgorithm::Mcr,
        Algo::McrAll => CampaignAlgorithm::McrAll,
    };
    let mut c = Campaign::new(loaded.scenario.clone(), algorithm);
    if let Some(s) = args.seeds.as_ref().or(d.seeds.as_ref()) {
        c.seeds = parse_seeds(s)?;
    }
    c.objective = args.objective.or(d.objective).unwrap_or(1);
    c.budget = args.budget.or(d.budget).unwrap_or(c.budget);
    c.lambda = args.lambda.or(d.lambda);
    let timeout = args.timeout.or(d.timeout).unwrap_or(600.0);
    if !(timeout > 0.0 && timeout.is_finite()) {
        bail!("timeout must be a positive number of seconds");
    }
    c.timeout = Duration::from_secs_f64(timeout);
    c.parallel = args.parallel;
    Ok(c)
}

fn run(args: RunArgs) -> Result<ExitCode, ConfigFailure> {
    let campaign = build_campaign(&args).map_err(ConfigFailure)?;
    let verbose = args.verbose;
    let report = run_campaign_with_progress(&campaign, &|p| {
        if verbose {
            let obj = p.objective.map(|k| format!(" objective {k}")).unwrap_or_default();
            eprintln!(
                "seed {}{obj} gen {} sims {} best {} conjuncts {:?}",
                p.seed, p.generation, p.simulations, p.best_robustness, p.best_conjuncts
            );
        }
    })
    .map_err(|e| ConfigFailure(e.into()))?;

    let format = match args.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    let written = match &args.out {
        Some(path) => File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                emit_report(&report, format, &mut w)?;
                w.flush()?;
                Ok(())
            }),
        None => emit_report(&report, format, io::stdout().lock()).map_err(Into::into),
    };
    written.map_err(ConfigFailure)?;

    for (i, r) in report.runs.iter().enumerate() {
        let label = match r.objective {
            Some(k) => format!("{:?} objective {k}", r.algorithm).to_lowercase(),
            None => format!("{:?}", r.algorithm).to_lowercase(),
        };
        let time = r.mean_time.map_or("---".to_string(), |t| format!("{t:.3}"));
        let mark = if report.best == Some(i) { " (best)" } else { "" };
        eprintln!("{label}: SR {}/{} time {time}{mark}", r.successes, r.trials.len());
    }
    Ok(if report.headline_successes() > 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn eval(trace: PathBuf, spec: String) -> Result<ExitCode, ConfigFailure> {
    let inner = || -> anyhow::Result<ExitCode> {
        let file = File::open(&trace).with_context(|| format!("cannot open {}", trace.display()))?;
        let trace = Trace::from_csv_reader(file)?;
        let formula = parse_formula(&spec)?;
        if formula.time_reach() > trace.horizon() + conjsynth::stl::INTERVAL_EPS {
            eprintln!("warning: spec looks {} s ahead but the trace ends at {} s", formula.time_reach(), trace.horizon());
        }
        let mut out = io::stdout().lock();
        for (j, c) in formula.top_level_conjuncts().iter().enumerate() {
            writeln!(out, "conjunct {}: {} {}", j + 1, robustness(&trace, c, 0)?, c)?;
        }
        let rb = robustness(&trace, &formula, 0)?;
        writeln!(out, "robustness: {rb}")?;
        writeln!(out, "satisfied: {}", boolean_sat(&trace, &formula, 0)?)?;
        Ok(if rb.is_satisfied() { ExitCode::SUCCESS } else { ExitCode::from(1) })
    };
    inner().map_err(ConfigFailure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::ListScenarios => {
            for s in builtin_scenarios() {
                println!("{:<24} {:<10} dim {:<3} {}", s.name, s.model.name(), s.input.dimension(), s.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { trace, spec } => eval(trace, spec),
    };
    match result {
        Ok(code) => code,
        Err(ConfigFailure(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
