use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mas2::harness::{self, CliError, Config, Harness};
use mas2_core::cto::Weighting;
use mas2_core::loss::{PoolWeighting, Reduction};

#[derive(Parser)]
#[command(name = "mas2", version, about = "Generate, run and curate LLM multi-agent workflows")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel trajectories (0 = number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Use the scripted mock backend (`--mock=FILE`); bare `--mock` uses the built-in demo script.
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, value_name = "SCRIPT")]
    mock: Option<Option<PathBuf>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReductionArg {
    Mean,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolArg {
    PerTuple,
    PerTree,
}

#[derive(Subcommand)]
enum Command {
    /// Sample workflow templates for a query.
    Generate {
        #[arg(long)]
        query: String,
        #[arg(short)]
        k: Option<usize>,
        #[arg(long, default_value = "templates")]
        out: PathBuf,
    },
    /// Assign backbones to a template.
    Instantiate {
        template: PathBuf,
        #[arg(short)]
        n: Option<usize>,
        #[arg(long, default_value = "workflows")]
        out: PathBuf,
    },
    /// Solve every task once, rectifying as needed, and report.
    Run {
        tasks: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build collaboration trees and export preference data.
    Curate {
        tasks: PathBuf,
        #[arg(short)]
        k: Option<usize>,
        #[arg(short)]
        n: Option<usize>,
        /// Rectifier samples at each trajectory's first trigger.
        #[arg(long)]
        resample: Option<usize>,
        /// Average child values without trajectory-count weights.
        #[arg(long)]
        unweighted: bool,
        #[arg(long, default_value = "curated")]
        out: PathBuf,
    },
    /// Value-scaled preference loss from externally computed log-probabilities.
    EvalLoss {
        prefs: PathBuf,
        logprobs: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_enum)]
        reduction: Option<ReductionArg>,
        #[arg(long, value_enum)]
        pool: Option<PoolArg>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Aggregate trajectory logs.
    Report {
        logs: Vec<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    Ok(cfg)
}

fn harness(cli: &Cli, cfg: Config) -> Result<Harness, CliError> {
    let mock = match &cli.mock {
        Some(path) => Some(harness::load_mock(path.as_deref())?),
        None => None,
    };
    Harness::new(cfg, mock)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Generate { query, k, out } => {
            let k = k.unwrap_or(cfg.meta.agents.k);
            let h = harness(&cli, cfg)?;
            for p in h.generate(query, k, out)? {
                println!("{}", p.display());
            }
        }
        Command::Instantiate { template, n, out } => {
            let n = n.unwrap_or(cfg.meta.agents.n);
            let h = harness(&cli, cfg)?;
            for p in h.instantiate(template, n, out)? {
                println!("{}", p.display());
            }
        }
        Command::Run { tasks, out } => {
            let tasks = harness::load_tasks(tasks)?;
            let h = harness(&cli, cfg)?;
            let report = h.run(&tasks, out)?;
            print!("{}", report.to_text());
        }
        Command::Curate { tasks, k, n, resample, unweighted, out } => {
            if let Some(k) = k {
                cfg.meta.agents.k = *k;
            }
            if let Some(n) = n {
                cfg.meta.agents.n = *n;
            }
            if let Some(r) = resample {
                cfg.curate.resample_rectifications = *r;
            }
            if *unweighted {
                cfg.curate.weighting = Weighting::Unweighted;
            }
            cfg.check()?;
            let tasks = harness::load_tasks(tasks)?;
            let h = harness(&cli, cfg)?;
            for (id, res) in h.curate(&tasks, out)? {
                match res {
                    Ok(c) => println!(
                        "{id}: {} nodes, {} trajectories, {} preference tuples",
                        c.tree.len(),
                        c.outcomes().count(),
                        c.preferences.len()
                    ),
                    Err(e) => println!("{id}: failed: {e}"),
                }
            }
        }
        Command::EvalLoss { prefs, logprobs, beta, reduction, pool, json } => {
            let mut loss = cfg.loss;
            if let Some(b) = beta {
                loss.beta = *b;
            }
            if let Some(r) = reduction {
                loss.reduction = match r {
                    ReductionArg::Mean => Reduction::Mean,
                    ReductionArg::Sum => Reduction::Sum,
                };
            }
            if let Some(p) = pool {
                loss.weighting = match p {
                    PoolArg::PerTuple => PoolWeighting::PerTuple,
                    PoolArg::PerTree => PoolWeighting::PerTree,
                };
            }
            let report = harness::eval_loss(prefs, logprobs, &loss)?;
            if let Some(path) = json {
                mas2::formats::write_json(path, &report)?;
            }
            print!("{}", harness::render_loss(&report));
        }
        Command::Report { logs, csv } => {
            let report = harness::report(logs)?;
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv()).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
            }
            print!("{}", report.to_text());
        }
    }
    Ok(())
}
