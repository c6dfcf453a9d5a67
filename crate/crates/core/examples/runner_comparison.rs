//! Table-style comparison on the damaged runner: median (over seeds) of the
//! per-task total cost and normalised forgetting for each algorithm.
//!
//! cargo run --release --example runner_comparison -- [algs] [seeds] [steps_per_task]
//! e.g. `-- ppo,safe_ewc 3 20000`

use lifeline::harness::report::aggregate_seed;
use lifeline::harness::run::run_seed;
use lifeline::harness::{Algorithm, EnvKind, ExperimentConfig};
use lifeline::RunSeed;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn main() -> lifeline::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let algs: Vec<Algorithm> = match args.first() {
        Some(list) => list.split(',').map(str::parse).collect::<lifeline::Result<_>>()?,
        None => vec![Algorithm::Ppo, Algorithm::PpoEwc, Algorithm::SafeEwc, Algorithm::CfEwc],
    };
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let steps: Option<u64> = args.get(2).and_then(|s| s.parse().ok());

    println!("{:<9} {:>12} {:>12} {:>12}   per-seed cost / forgetting", "algorithm", "total cost", "norm. forg.", "final rew.");
    for alg in algs {
        let mut cfg = ExperimentConfig::defaults(alg, EnvKind::Runner);
        if let Some(s) = steps {
            cfg.steps_per_task = s;
        }
        let t = std::time::Instant::now();
        let mut aggs = Vec::new();
        for seed in 0..seeds {
            let res = run_seed(&cfg, RunSeed(seed), None, &mut |_| {})?;
            aggs.push(aggregate_seed(seed, &res.summaries));
        }
        let per_seed: Vec<String> = aggs
            .iter()
            .map(|a| format!("{:.0}/{:.3}", a.total_cost, a.normalized_forgetting.unwrap_or(f64::NAN)))
            .collect();
        println!(
            "{:<9} {:>12.1} {:>12.3} {:>12.1}   {}  ({:.0?})",
            alg.id(),
            median(aggs.iter().map(|a| a.total_cost).collect()),
            median(aggs.iter().filter_map(|a| a.normalized_forgetting).collect()),
            median(aggs.iter().map(|a| a.final_reward).collect()),
            per_seed.join(" "),
            t.elapsed()
        );
    }
    Ok(())
}
