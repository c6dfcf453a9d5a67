use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lifeline::envs::{ChainFamily, ChainSpec};
use lifeline::harness::{self, checks, ExperimentConfig, RunStatus};
use lifeline::{Error, TaskFamily};

#[derive(Parser)]
#[command(name = "lifeline", version, about = "Safe continual RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run {
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps_per_task: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate all runs found under a directory.
    Report { dir: PathBuf },
    /// Check a saved chain policy against the value/cost-value constraints.
    OracleCheck {
        chain_spec: PathBuf,
        policy_ckpt: PathBuf,
        #[arg(long, default_value_t = 25.0)]
        cost_limit: f64,
        #[arg(long, default_value_t = 0.05)]
        eps_forget: f64,
        /// Tasks to check (default: all chain tasks).
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
    },
    /// Finite-difference check of every analytic gradient.
    GradCheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;
const VIOLATION: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::Parse(_) => ExitCode::from(CONFIG_ERROR),
        _ => ExitCode::from(RUNTIME_ERROR),
    }
}

fn run(config: PathBuf, seed: Option<u64>, steps: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let mut overrides = toml::Table::new();
    if let Some(s) = seed {
        overrides.insert("seeds".into(), toml::Value::Array(vec![toml::Value::Integer(s as i64)]));
    }
    if let Some(n) = steps {
        overrides.insert("steps_per_task".into(), toml::Value::Integer(n as i64));
    }
    if let Some(o) = out {
        overrides.insert("out_dir".into(), toml::Value::String(o.display().to_string()));
    }
    let cfg = match ExperimentConfig::from_toml_with(&text, overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let outcome = match harness::run(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let mut failed = 0;
    for s in &outcome.seeds {
        match (&s.status, &s.failure) {
            (RunStatus::Ok, _) => println!("seed {}: ok ({} episodes)", s.seed, s.episodes.len()),
            (_, msg) => {
                failed += 1;
                println!("seed {}: FAILED {}", s.seed, msg.as_deref().unwrap_or(""));
            }
        }
    }
    println!("artifacts in {}", outcome.dir.display());
    if failed > 0 {
        ExitCode::from(RUNTIME_ERROR)
    } else {
        ExitCode::SUCCESS
    }
}

fn oracle(spec: PathBuf, ckpt: PathBuf, d: f64, eps: f64, mut tasks: Vec<String>) -> ExitCode {
    if tasks.is_empty() {
        match ChainSpec::load(&spec) {
            Ok(s) => tasks = ChainFamily::with_default_tasks(s).task_ids(),
            Err(e) => return fail(&e),
        }
    }
    match checks::oracle_check(&spec, &ckpt, &tasks, d, eps) {
        Ok(report) => {
            print!("{}", report.to_table());
            if report.feasible() {
                println!("feasible");
                ExitCode::SUCCESS
            } else {
                println!("{} violation(s)", report.violations());
                ExitCode::from(VIOLATION)
            }
        }
        Err(Error::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(e) => fail(&e),
    }
}

fn grad_check(instances: usize, seed: u64) -> ExitCode {
    let checks = match checks::gradient_suite(instances, seed) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let mut worst = std::collections::BTreeMap::<&str, f64>::new();
    let mut bad = 0;
    for c in &checks {
        let w = worst.entry(c.name).or_insert(0.0);
        *w = w.max(c.report.max_rel_error);
        if !c.report.pass {
            bad += 1;
        }
    }
    for (name, err) in &worst {
        println!("{name:<20} max rel err {err:.3e}");
    }
    println!("{} checks, {} failed", checks.len(), bad);
    if bad > 0 {
        ExitCode::from(RUNTIME_ERROR)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            steps_per_task,
            out,
        } => run(config, seed, steps_per_task, out),
        Command::Report { dir } => match harness::report(&dir) {
            Ok((_, table)) => {
                print!("{table}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::OracleCheck {
            chain_spec,
            policy_ckpt,
            cost_limit,
            eps_forget,
            tasks,
        } => oracle(chain_spec, policy_ckpt, cost_limit, eps_forget, tasks),
        Command::GradCheck { instances, seed } => grad_check(instances, seed),
    }
}
