//! Exact dynamic programming on the hazard chain: optimal values, the
//! reward-greedy policy's cost, a safe detour, and the value/cost-value
//! feasibility table. Writes the chain table to `hazard_chain.txt` (or the
//! path given) for use with `lifeline oracle-check`.

use std::collections::BTreeMap;

use lifeline::envs::{ChainFamily, ChainSpec};
use lifeline::oracle::{check_constraints, policy_evaluate, references, value_iterate, Signal, TabularPolicy, DEFAULT_TOL};

fn main() -> lifeline::Result<()> {
    let spec = ChainSpec::hazard_chain();
    let path = std::env::args().nth(1).unwrap_or_else(|| "hazard_chain.txt".into());
    spec.save(std::path::Path::new(&path))?;
    println!("chain table written to {path}");

    let (v_star, greedy) = value_iterate(&spec, spec.gamma, DEFAULT_TOL)?;
    let greedy_cost = policy_evaluate(&spec, &greedy, Signal::Cost, spec.gamma, DEFAULT_TOL)?;
    println!("V*      {:?}", v_star.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("greedy  {:?}  V^C(start) = {:.4}", greedy.argmax_actions(), greedy_cost[spec.start]);

    // right, right, careful, right: avoid the dash out of cell 2
    let detour = TabularPolicy::deterministic(3, &[2, 2, 1, 2, 0])?;
    let v = policy_evaluate(&spec, &detour, Signal::Reward, spec.gamma, DEFAULT_TOL)?;
    let vc = policy_evaluate(&spec, &detour, Signal::Cost, spec.gamma, DEFAULT_TOL)?;
    println!("detour  V(start) = {:.4}, V^C(start) = {:.4}", v[spec.start], vc[spec.start]);

    let family = ChainFamily::with_default_tasks(spec);
    let tasks: Vec<(String, ChainSpec)> = ["upright", "mirrored"]
        .iter()
        .map(|t| Ok((t.to_string(), family.task_spec(t)?)))
        .collect::<lifeline::Result<_>>()?;
    let refs: BTreeMap<String, Vec<f64>> = references(&tasks)?;
    let checked: Vec<_> = tasks.into_iter().map(|(t, s)| (t, s, detour.clone())).collect();
    let report = check_constraints(&checked, 0.1, 0.2, &refs)?;
    print!("{}", report.to_table());
    println!("feasible: {} ({} violations)", report.feasible(), report.violations());
    Ok(())
}
