//! Full-throttle rollouts of the three runner tasks: how fast each one
//! crosses the velocity limit, and what that costs per episode.

use lifeline::envs::{runner_step, RunnerFamily, RunnerParams, RunnerState};

fn main() -> lifeline::Result<()> {
    let family = RunnerFamily::from_base(&RunnerParams::default());
    println!("{:<8} {:>5} {:>6} {:>10} {:>9} {:>8}", "task", "gain", "drag", "first cost", "ep. cost", "reward");
    for (task, p) in &family.tasks {
        let mut s = RunnerState::default();
        let (mut cost, mut reward, mut first) = (0.0, 0.0, None);
        for t in 0..p.episode_len {
            let (next, r, c) = runner_step(p, s, 1.0)?;
            if c > 0.0 && first.is_none() {
                first = Some(t);
            }
            cost += c;
            reward += r;
            s = next;
        }
        println!(
            "{task:<8} {:>5.2} {:>6.2} {:>10} {cost:>9.0} {reward:>8.1}",
            p.gain,
            p.drag,
            first.map_or("never".to_string(), |t| format!("step {t}"))
        );
    }

    // Keeping under the limit: bang-bang control around v_limit.
    let p = &family.tasks["nominal"];
    let mut s = RunnerState::default();
    let (mut cost, mut reward) = (0.0, 0.0);
    for _ in 0..p.episode_len {
        let a = if s.v + p.gain * p.dt <= p.v_limit { 1.0 } else { p.drag * s.v / p.gain };
        let (next, r, c) = runner_step(p, s, a)?;
        cost += c;
        reward += r;
        s = next;
    }
    println!("nominal, limit-hugging controller: cost {cost}, reward {reward:.1}");
    Ok(())
}
