//! PPO vs. PPO-Lag vs. CPPO-PID on the hazard chain, scored by the exact
//! oracle: cost value of the learned policy at the start state.
//!
//! cargo run --release --example constrained_chain [-- steps d seeds]

use lifeline::harness::run::run_seed;
use lifeline::harness::{Algorithm, EnvKind, ExperimentConfig};
use lifeline::oracle::{policy_evaluate, value_iterate, Signal, TabularPolicy, DEFAULT_TOL};
use lifeline::RunSeed;

fn main() -> lifeline::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let d: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);

    let family = lifeline::harness::run::chain_family(&ExperimentConfig::defaults(Algorithm::Ppo, EnvKind::Chain))?;
    let spec = family.task_spec("upright")?;
    let (_, greedy) = value_iterate(&spec, spec.gamma, DEFAULT_TOL)?;
    let greedy_cost = policy_evaluate(&spec, &greedy, Signal::Cost, spec.gamma, DEFAULT_TOL)?[spec.start];
    println!("reward-greedy policy: V^C(start) = {greedy_cost:.4}, limit d = {d}");

    for alg in [Algorithm::Ppo, Algorithm::PpoLag, Algorithm::CppoPid] {
        let mut cfg = ExperimentConfig::defaults(alg, EnvKind::Chain);
        cfg.schedule = vec!["upright".into()];
        cfg.steps_per_task = steps;
        cfg.constraint.cost_limit = d;
        let mut line = format!("{:<9}", alg.id());
        for seed in 0..seeds {
            let res = run_seed(&cfg, RunSeed(seed), None, &mut |_| {})?;
            let pi = TabularPolicy::from_gaussian(&res.final_agent.ac.policy, &spec)?;
            let vc = policy_evaluate(&spec, &pi, Signal::Cost, spec.gamma, DEFAULT_TOL)?[spec.start];
            let v = policy_evaluate(&spec, &pi, Signal::Reward, spec.gamma, DEFAULT_TOL)?[spec.start];
            line += &format!("  V^C {vc:.3} V {v:.3} |");
        }
        println!("{line}");
    }
    Ok(())
}
