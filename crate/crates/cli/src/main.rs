//! `trajfuse`: generate scenario suites, run fused prediction experiments,
//! sweep the fuser learning rate and rebuild reports.
//!
//! Every configuration key can also be set with a flag of the same dotted
//! name, e.g. `--fuser.gamma=0.05` or `--suite.counts.fork 10`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use trajfuse::harness::{report_dir, run_dataset, sweep_eta, write_report, HarnessError, RunConfig};
use trajfuse::metrics::{MetricTable, METRIC_NAMES};
use trajfuse::scenario::generate_suite;
use trajfuse::{load_dataset, save_dataset};

#[derive(Parser)]
#[command(name = "trajfuse", version, about = "Rule-hierarchy prediction with Bayesian predictor fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario suite and save it as dataset JSON.
    Generate {
        /// Suite description (TOML with `seed`, `counts`, `params`).
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Suite seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output dataset file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both predictors and the fuser, then write a report.
    Run(RunArgs),
    /// Repeat a run for several learning rates and tabulate the fused MDB.
    SweepEta {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated learning rates.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.4,0.7,1.0")]
        etas: Vec<f64>,
    },
    /// Rebuild summary, scatter and histogram files from a run's metrics.csv.
    Report {
        /// Run directory.
        dir: PathBuf,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset JSON; without it the synthetic suite is generated.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Suite description (TOML) used when no dataset is given.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Learned and rule-based predictor, e.g. `surrogate,rh`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    predictors: Option<Vec<String>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    history: Option<u32>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    reward_base: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

const DEFAULT_OUT: &str = "trajfuse-out";

/// Splits `--a.b=value` and `--a.b value` arguments from the rest.
fn split_dotted(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut plain = Vec::new();
    let mut dotted = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            plain.push(arg);
            continue;
        };
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_owned(), Some(v.to_owned())),
            None => (body.to_owned(), None),
        };
        if !key.contains('.') {
            plain.push(arg);
            continue;
        }
        let value = match value {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("flag --{key} needs a value"))?,
        };
        dotted.push((key.replace('-', "_"), value));
    }
    Ok((plain, dotted))
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Config file, then the suite file under `suite`, then named flags, then dotted flags.
fn run_config(args: &RunArgs, dotted: &[(String, String)]) -> Result<RunConfig, HarnessError> {
    let mut root: toml::Table = match &args.config {
        Some(path) => toml::from_str(&read(path)?).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?,
        None => toml::Table::new(),
    };
    if let Some(path) = &args.suite {
        let suite: toml::Table =
            toml::from_str(&read(path)?).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        root.insert("suite".into(), toml::Value::Table(suite));
    }
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k.to_owned(), v));
        }
    };
    set("dataset", args.dataset.as_ref().map(|p| quoted(&p.to_string_lossy())));
    set(
        "predictors",
        args.predictors.as_ref().map(|p| format!("[{}]", p.iter().map(|s| quoted(s.trim())).collect::<Vec<_>>().join(", "))),
    );
    set("n", args.n.map(|v| v.to_string()));
    set("horizon", args.horizon.map(|v| v.to_string()));
    set("history", args.history.map(|v| v.to_string()));
    set("fuser.eta", args.eta.map(|v| format!("{v:?}")));
    set("fuser.gamma", args.gamma.map(|v| format!("{v:?}")));
    set("fuser.lambda", args.lambda.map(|v| format!("{v:?}")));
    set("hierarchy.zeta", args.zeta.map(|v| format!("{v:?}")));
    set("hierarchy.reward_base", args.reward_base.map(|v| format!("{v:?}")));
    set("seed", args.seed.map(|v| v.to_string()));
    set("out", args.out.as_ref().map(|p| quoted(&p.to_string_lossy())));
    set("workers", args.workers.map(|v| v.to_string()));
    overrides.extend(dotted.iter().cloned());
    let text = toml::to_string(&root).expect("table serializes");
    RunConfig::from_toml(&text, &overrides)
}

fn print_table(table: &MetricTable) {
    print!("{:<12} {:>6}", "predictor", "scenes");
    for name in METRIC_NAMES {
        print!(" {name:>9}");
    }
    println!(" {:>8}", "MDB%");
    for row in &table.rows {
        print!("{:<12} {:>6}", row.predictor, row.scenes);
        for m in row.mean {
            print!(" {m:>9.4}");
        }
        println!(" {:>8.2}", row.mdb);
    }
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn execute(command: Command, dotted: &[(String, String)]) -> Result<(), Failure> {
    match command {
        Command::Generate { suite, seed, out } => {
            let args = RunArgs { suite, ..Default::default() };
            let mut dotted: Vec<(String, String)> = dotted.iter().map(|(k, v)| (format!("suite.{k}"), v.clone())).collect();
            if let Some(seed) = seed {
                dotted.push(("suite.seed".into(), seed.to_string()));
            }
            let cfg = run_config(&args, &dotted)?;
            let dataset = generate_suite(&cfg.suite).map_err(HarnessError::from)?;
            save_dataset(&dataset, &out).with_context(|| format!("writing {}", out.display())).map_err(runtime)?;
            println!("wrote {} episodes to {}", dataset.episodes.len(), out.display());
        }
        Command::Run(args) => {
            let cfg = run_config(&args, dotted)?;
            let dataset = match &cfg.dataset {
                Some(path) => load_dataset(path).map_err(HarnessError::from)?,
                None => generate_suite(&cfg.suite).map_err(HarnessError::from)?,
            };
            let output = run_dataset(&cfg, &dataset)?;
            let mut report = output.report()?;
            report.files.insert("config.toml", cfg.to_toml());
            let dir = cfg.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());
            write_report(&report, &dir)?;
            print_table(&report.table);
            println!(
                "{} scenes from {} episodes ({} failed); report in {}",
                output.scenes(),
                output.episodes,
                output.failures.len(),
                dir.display()
            );
        }
        Command::SweepEta { run, etas } => {
            let cfg = run_config(&run, dotted)?;
            let sweep = sweep_eta(&cfg, &etas)?;
            let dir = cfg.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());
            let table = sweep.table_csv(trajfuse::harness::FUSED_LABEL);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).map_err(runtime)?;
            fs::write(dir.join("sweep.csv"), &table).context("writing sweep.csv").map_err(runtime)?;
            let json = serde_json::to_string_pretty(&sweep).expect("sweep serializes") + "\n";
            fs::write(dir.join("sweep.json"), json).context("writing sweep.json").map_err(runtime)?;
            print!("{table}");
            if !sweep.standalone_samples_identical {
                println!("warning: standalone predictor samples differed between learning rates");
            }
        }
        Command::Report { dir } => {
            let report = report_dir(&dir)?;
            print_table(&report.table);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (plain, dotted) = match split_dotted(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(plain) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command, &dotted) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dotted_flags_are_split_out() {
        let (plain, dotted) =
            split_dotted(strings(&["trajfuse", "run", "--n", "3", "--fuser.eta=0.4", "--suite.counts.fork", "2"])).unwrap();
        assert_eq!(plain, strings(&["trajfuse", "run", "--n", "3"]));
        assert_eq!(dotted, vec![("fuser.eta".into(), "0.4".into()), ("suite.counts.fork".into(), "2".into())]);
        assert!(split_dotted(strings(&["trajfuse", "--fuser.eta"])).is_err());
    }

    #[test]
    fn named_flags_map_to_config_keys() {
        let cli = Cli::try_parse_from([
            "trajfuse", "run", "--predictors", "rh,surrogate", "--eta", "0.7", "--zeta", "2", "--reward-base", "5", "--workers", "1",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else { panic!("expected run") };
        let cfg = run_config(&args, &[("tree.w_theta".into(), "1.5".into())]).unwrap();
        assert_eq!(cfg.labels(), ["rh".to_string(), "surrogate".to_string()]);
        assert_eq!((cfg.fuser.eta, cfg.hierarchy.zeta, cfg.hierarchy.reward_base), (0.7, 2.0, 5.0));
        assert_eq!((cfg.workers, cfg.tree.w_theta), (1, 1.5));
    }
}
