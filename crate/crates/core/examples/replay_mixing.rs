//! Rehearsal batches: half fresh on-policy rows, half drawn from the
//! long-term store of earlier tasks.

use lifeline::continual::{replay_mix, ReplayStore};
use lifeline::nn::Mlp;
use lifeline::rng::{self, Purpose, RunSeed};
use lifeline::Transition;

fn fake(task_bias: f64, n: usize, rng: &mut lifeline::rng::Rng) -> Vec<Transition> {
    (0..n)
        .map(|k| Transition {
            state: vec![task_bias + rng::normal(rng) * 0.1],
            action: vec![rng::normal(rng)],
            reward: task_bias,
            cost: 0.0,
            next_state: vec![task_bias],
            terminated: false,
            truncated: k + 1 == n,
            log_prob: -1.0,
            value: 0.0,
            cost_value: 0.0,
        })
        .collect()
}

fn main() -> lifeline::Result<()> {
    let mut rng = RunSeed(3).stream(Purpose::Replay);
    let critic = Mlp::new(vec![1, 16, 1], &mut rng)?;
    let cost_critic = Mlp::new(vec![1, 16, 1], &mut rng)?;

    let mut store = ReplayStore::new(300);
    store.extend("nominal", &fake(1.0, 200, &mut rng));
    store.extend("back", &fake(-1.0, 200, &mut rng));
    println!("store holds {} of capacity {} (oldest evicted)", store.len(), store.capacity());

    let current = fake(0.0, 64, &mut rng);
    let mixed = replay_mix(&store, &current, 64, &critic, &cost_critic, 0.99, 0.95, &mut rng)?;
    let mut counts = std::collections::BTreeMap::new();
    for t in &mixed.replay_tasks {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    println!("batch rows {}, replayed per task {counts:?}", mixed.batch.len());
    Ok(())
}
