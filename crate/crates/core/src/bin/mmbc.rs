use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use mmbc::experiment::{export_plot_data, run_experiment, run_suite, suite_table_text, ExperimentConfig, Suite};
use mmbc::{Error, InfonceMode, ModelKind, NoiseModel, Result, TaskKind};

#[derive(Parser)]
#[command(name = "mmbc", version, about = "Train and evaluate multi-modal behavior cloning models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration over several seeds.
    Run(RunArgs),
    /// Run a predefined table of configurations.
    Suite(SuiteArgs),
    /// Rewrite scatter, landscape and trace files of a finished run.
    Export {
        #[arg(long = "run")]
        run: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; fields not given take the preset of its task and model.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<TaskKind>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Comma list (`0,1,2`) or half-open range (`0..5`).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `diagonal`, `isotropic`, `isotropic_across_clusters`, `fixed:<level>` or `laplace_diagonal`.
    #[arg(long)]
    noise: Option<NoiseModel>,
    #[arg(long = "infonce-mode")]
    infonce_mode: Option<InfonceMode>,
}

#[derive(Args)]
struct SuiteArgs {
    name: Option<Suite>,
    #[arg(long = "suite")]
    suite: Option<Suite>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<String>,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Usage(format!("cannot parse seeds `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return if a < b { Ok((a..b).collect()) } else { Err(bad()) };
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
        .collect()
}

fn run(args: RunArgs) -> Result<()> {
    let mut doc: Value = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => json!({}),
    };
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
    if let Some(t) = args.task {
        obj.insert("task".into(), json!(t.name()));
    }
    if let Some(m) = args.model {
        obj.insert("model".into(), json!(m.name()));
    }
    let mut config = ExperimentConfig::from_value(&doc)?;
    if let Some(s) = &args.seeds {
        config.seeds = parse_seeds(s)?;
    }
    if let Some(out) = args.out {
        config.out = Some(out);
    }
    if let Some(noise) = args.noise {
        config.train.noise = noise;
    }
    if let Some(mode) = args.infonce_mode {
        config.train.infonce_mode = mode;
    }
    config.validate()?;
    let record = run_experiment(&config)?;
    print!("{}", record.metrics_csv()?);
    eprintln!("finished in {:.1}s", record.wall_clock_seconds);
    Ok(())
}

fn suite(args: SuiteArgs) -> Result<()> {
    let suite = match (args.name, args.suite) {
        (Some(a), Some(b)) if a != b => return Err(Error::Usage("conflicting suite names".into())),
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => return Err(Error::Usage("a suite name is required".into())),
    };
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s)?,
        None => mmbc::experiment::DEFAULT_SEEDS.to_vec(),
    };
    let rows = run_suite(suite, args.out.as_deref(), &seeds)?;
    print!("{}", suite_table_text(suite, &rows));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Suite(args) => suite(args),
        Command::Export { run } => export_plot_data(&run).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
