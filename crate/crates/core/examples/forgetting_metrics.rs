//! Per-task metrics from a synthetic episode log: a task learned, lost
//! while another task trains, then partly recovered.

use lifeline::metrics::{summarize, visit_stats};
use lifeline::EpisodeRecord;

fn episode(task: &str, visit: usize, reward: f64, cost: f64) -> EpisodeRecord {
    EpisodeRecord {
        global_step: 0,
        task_id: task.into(),
        visit_index: visit,
        total_reward: reward,
        total_cost: cost,
        length: 200,
        success: None,
    }
}

fn main() -> lifeline::Result<()> {
    let mut log = Vec::new();
    // first visit of "a": 0 -> 100
    log.extend((0..60).map(|k| episode("a", 0, (k as f64 * 2.0).min(100.0), 3.0)));
    log.extend((0..60).map(|_| episode("b", 0, 50.0, 1.0)));
    // back on "a": starts at 40, climbs to 90
    log.extend((0..60).map(|k| episode("a", 1, (40.0 + k as f64).min(90.0), 2.0)));

    for v in visit_stats(&log)? {
        println!(
            "{} visit {}: initial {:.1}, final {:.1}, immediate {:?}, cost {:.0}",
            v.task_id,
            v.visit_index,
            v.initial_reward.value,
            v.final_reward.value,
            v.immediate_reward.map(|w| w.value),
            v.total_cost
        );
    }
    for s in summarize(&log)? {
        println!(
            "{}: final {:.1}, normalised forgetting {:?}, total cost {:.0}",
            s.task_id,
            s.final_reward,
            s.normalized_forgetting.map(|n| n.value),
            s.total_cost
        );
    }
    Ok(())
}
