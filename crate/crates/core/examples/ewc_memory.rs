//! Plain vs cost-weighted Fisher memories for the same frozen runner
//! policy, and the EWC pull back toward it.

use lifeline::continual::{ewc_penalty, finish_task, EwcMemory, FisherWeighting};
use lifeline::envs::{RunnerEnv, RunnerParams};
use lifeline::nn::GaussianPolicy;
use lifeline::rng::{Purpose, RunSeed};

fn main() -> lifeline::Result<()> {
    let seed = RunSeed(11);
    let policy = GaussianPolicy::new(1, &[32, 32], 1, &mut seed.stream(Purpose::Init))?;
    let mut memories = Vec::new();
    for w in [FisherWeighting::Plain, FisherWeighting::CostWeighted] {
        let mut mem = EwcMemory::new(12.926);
        let mut env = RunnerEnv::new(RunnerParams::default())?;
        // same stream for both, so the rollouts match
        finish_task(&mut mem, &policy, "nominal", &mut env, 1000, w, &mut seed.stream(Purpose::Fisher))?;
        let f = &mem.entries[0].fisher;
        println!(
            "{w:?}: sum F = {:.4}, max F = {:.4}",
            f.iter().sum::<f64>(),
            f.iter().cloned().fold(0.0, f64::max)
        );
        memories.push(mem);
    }

    let mut theta = policy.params().to_vec();
    println!("penalty at theta*: {}", ewc_penalty(&memories[0], &theta)?.0);
    for t in theta.iter_mut() {
        *t += 0.05;
    }
    for (m, name) in memories.iter().zip(["plain", "cost-weighted"]) {
        let (p, g) = ewc_penalty(m, &theta)?;
        println!("{name}: penalty after a 0.05 shift {p:.4}, |grad| {:.4}", g.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    Ok(())
}
