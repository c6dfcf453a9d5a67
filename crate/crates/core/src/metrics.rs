//! Per-visit and per-task evaluation metrics over episode records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::EpisodeRecord;

/// Episodes averaged at the start and end of a visit.
pub const WINDOW: usize = 20;
/// Floor on the normalising reward range.
pub const RANGE_FLOOR: f64 = 1e-8;

/// A windowed mean and the number of episodes it actually covered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Windowed {
    pub value: f64,
    pub window: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn check_nonempty(visit: &[EpisodeRecord]) -> Result<()> {
    if visit.is_empty() {
        Err(Error::contract("metric over a visit with no episodes"))
    } else {
        Ok(())
    }
}

/// Mean reward of the last `min(20, len)` episodes.
pub fn final_reward(visit: &[EpisodeRecord]) -> Result<Windowed> {
    check_nonempty(visit)?;
    let w = WINDOW.min(visit.len());
    Ok(Windowed {
        value: mean(visit[visit.len() - w..].iter().map(|e| e.total_reward)),
        window: w,
    })
}

/// Mean reward of the first `min(20, len)` episodes.
pub fn initial_reward(visit: &[EpisodeRecord]) -> Result<Windowed> {
    check_nonempty(visit)?;
    let w = WINDOW.min(visit.len());
    Ok(Windowed {
        value: mean(visit[..w].iter().map(|e| e.total_reward)),
        window: w,
    })
}

/// Sum of episode costs in each visit, averaged over visits.
pub fn total_cost(visits: &[&[EpisodeRecord]]) -> f64 {
    if visits.is_empty() {
        return 0.0;
    }
    mean(visits.iter().map(|v| v.iter().map(|e| e.total_cost).sum::<f64>()))
}

/// `r_final(visit k) - r_immediate(visit k+1)`; negative means forward transfer.
pub fn forgetting(final_reward: f64, immediate_reward: f64) -> f64 {
    final_reward - immediate_reward
}

/// Share of successful episodes, or `None` when episodes carry no flag.
pub fn success_rate(visit: &[EpisodeRecord]) -> Option<f64> {
    let flags: Vec<bool> = visit.iter().filter_map(|e| e.success).collect();
    if flags.is_empty() {
        None
    } else {
        Some(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedForgetting {
    pub value: f64,
    /// The first visit's reward range was below the floor.
    pub degenerate: bool,
}

/// Mean forgetting over revisits divided by `|final - initial|` of the first visit.
pub fn normalized_forgetting(forgettings: &[f64], first_initial: f64, first_final: f64) -> Option<NormalizedForgetting> {
    if forgettings.is_empty() {
        return None;
    }
    let range = (first_final - first_initial).abs();
    Some(NormalizedForgetting {
        value: mean(forgettings.iter().copied()) / range.max(RANGE_FLOOR),
        degenerate: range < RANGE_FLOOR,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVisitStats {
    pub task_id: String,
    pub visit_index: usize,
    pub episodes: usize,
    pub initial_reward: Windowed,
    pub final_reward: Windowed,
    /// Initial reward of the next visit to the same task, if any.
    pub immediate_reward: Option<Windowed>,
    pub total_cost: f64,
    pub success_rate: Option<f64>,
}

/// Splits a record stream into maximal runs of the same (task, visit).
pub fn split_visits(records: &[EpisodeRecord]) -> Vec<&[EpisodeRecord]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        let cut = i == records.len()
            || records[i].task_id != records[start].task_id
            || records[i].visit_index != records[start].visit_index;
        if cut {
            out.push(&records[start..i]);
            start = i;
        }
    }
    out
}

pub fn visit_stats(records: &[EpisodeRecord]) -> Result<Vec<TaskVisitStats>> {
    let visits = split_visits(records);
    let mut stats = Vec::with_capacity(visits.len());
    for (k, v) in visits.iter().enumerate() {
        let next = visits[k + 1..]
            .iter()
            .find(|w| w[0].task_id == v[0].task_id && w[0].visit_index > v[0].visit_index);
        stats.push(TaskVisitStats {
            task_id: v[0].task_id.clone(),
            visit_index: v[0].visit_index,
            episodes: v.len(),
            initial_reward: initial_reward(v)?,
            final_reward: final_reward(v)?,
            immediate_reward: next.map(|w| initial_reward(w)).transpose()?,
            total_cost: v.iter().map(|e| e.total_cost).sum(),
            success_rate: success_rate(v),
        });
    }
    Ok(stats)
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub visits: usize,
    /// Final reward averaged over the task's visits.
    pub final_reward: f64,
    pub normalized_forgetting: Option<NormalizedForgetting>,
    pub total_cost: f64,
    /// Success rate averaged over the task's visits.
    pub success_rate: Option<f64>,
}

/// Per-task summaries in first-appearance order.
pub fn summarize(records: &[EpisodeRecord]) -> Result<Vec<TaskSummary>> {
    let stats = visit_stats(records)?;
    let mut order: Vec<&str> = Vec::new();
    for s in &stats {
        if !order.contains(&s.task_id.as_str()) {
            order.push(&s.task_id);
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for task in order {
        let mine: Vec<&TaskVisitStats> = stats.iter().filter(|s| s.task_id == task).collect();
        let forgettings: Vec<f64> = mine
            .iter()
            .filter_map(|s| s.immediate_reward.map(|im| forgetting(s.final_reward.value, im.value)))
            .collect();
        let first = mine[0];
        let rates: Vec<f64> = mine.iter().filter_map(|s| s.success_rate).collect();
        out.push(TaskSummary {
            task_id: task.to_string(),
            visits: mine.len(),
            final_reward: mean(mine.iter().map(|s| s.final_reward.value)),
            normalized_forgetting: normalized_forgetting(&forgettings, first.initial_reward.value, first.final_reward.value),
            total_cost: mean(mine.iter().map(|s| s.total_cost)),
            success_rate: if rates.is_empty() {
                None
            } else {
                Some(mean(rates.iter().copied()))
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(task: &str, visit: usize, reward: f64, cost: f64) -> EpisodeRecord {
        EpisodeRecord {
            global_step: 0,
            task_id: task.into(),
            visit_index: visit,
            total_reward: reward,
            total_cost: cost,
            length: 1,
            success: None,
        }
    }

    fn rewards(rs: impl IntoIterator<Item = f64>) -> Vec<EpisodeRecord> {
        rs.into_iter().map(|r| rec("a", 0, r, 0.0)).collect()
    }

    #[test]
    fn final_reward_examples() {
        assert_eq!(final_reward(&rewards([5.0; 20])).unwrap().value, 5.0);
        assert_eq!(final_reward(&rewards((1..=30).map(f64::from))).unwrap().value, 20.5);
        let w = final_reward(&rewards([1.0, 2.0, 3.0])).unwrap();
        assert_eq!((w.value, w.window), (2.0, 3));
        assert!(final_reward(&[]).is_err());
    }

    #[test]
    fn total_cost_examples() {
        let v: Vec<_> = [1.0, 2.0, 3.0].iter().map(|c| rec("a", 0, 0.0, *c)).collect();
        assert_eq!(total_cost(&[&v]), 6.0);
        let a = vec![rec("a", 0, 0.0, 10.0)];
        let b = vec![rec("a", 1, 0.0, 20.0)];
        assert_eq!(total_cost(&[&a, &b]), 15.0);
        let z = vec![rec("a", 0, 0.0, 0.0)];
        assert_eq!(total_cost(&[&z]), 0.0);
    }

    #[test]
    fn forgetting_examples() {
        assert_eq!(forgetting(100.0, 80.0), 20.0);
        assert_eq!(forgetting(7.0, 7.0), 0.0);
        assert_eq!(forgetting(50.0, 70.0), -20.0);
    }

    #[test]
    fn normalized_forgetting_examples() {
        assert_eq!(normalized_forgetting(&[20.0], 0.0, 100.0).unwrap().value, 0.2);
        assert_eq!(normalized_forgetting(&[0.0], 0.0, 100.0).unwrap().value, 0.0);
        let flat = normalized_forgetting(&[1e-9], 4.0, 4.0).unwrap();
        assert!(flat.degenerate);
        assert!((flat.value - 0.1).abs() < 1e-12);
        assert!(normalized_forgetting(&[], 0.0, 1.0).is_none());
    }

    #[test]
    fn success_rate_examples() {
        let mk = |f: &[bool]| -> Vec<EpisodeRecord> {
            f.iter()
                .map(|&s| EpisodeRecord {
                    success: Some(s),
                    ..rec("a", 0, 0.0, 0.0)
                })
                .collect()
        };
        assert_eq!(success_rate(&mk(&[true, true])), Some(1.0));
        assert_eq!(success_rate(&mk(&[true, false, true, false])), Some(0.5));
        assert_eq!(success_rate(&rewards([1.0])), None);
    }

    #[test]
    fn summary_over_a_revisit() {
        // a: 0 -> 100 on the first visit, re-enters at 80.
        let mut recs: Vec<_> = (0..40).map(|i| rec("a", 0, if i < 20 { 0.0 } else { 100.0 }, 1.0)).collect();
        recs.extend((0..5).map(|_| rec("b", 0, 3.0, 0.0)));
        recs.extend((0..20).map(|_| rec("a", 1, 80.0, 2.0)));
        let s = summarize(&recs).unwrap();
        assert_eq!(s[0].task_id, "a");
        assert_eq!(s[0].visits, 2);
        assert_eq!(s[0].normalized_forgetting.as_ref().unwrap().value, 0.2);
        assert_eq!(s[0].total_cost, 40.0);
        assert_eq!(s[0].final_reward, 90.0);
        assert!(s[1].normalized_forgetting.is_none());
    }

    proptest! {
        #[test]
        fn forgetting_identity(rs in prop::collection::vec(-50.0f64..50.0, 2..80), cut in 1usize..79) {
            let cut = cut.min(rs.len() - 1);
            let mut recs: Vec<_> = rs[..cut].iter().map(|r| rec("a", 0, *r, 0.0)).collect();
            recs.extend(rs[cut..].iter().map(|r| rec("a", 1, *r, 0.0)));
            let st = visit_stats(&recs).unwrap();
            let f = st[0].final_reward.value;
            let im = st[0].immediate_reward.unwrap().value;
            prop_assert!((forgetting(f, im) + im - f).abs() <= 1e-12 * f.abs().max(1.0));
            // Splitting at visit boundaries and recombining is the identity.
            let parts: Vec<Vec<EpisodeRecord>> = split_visits(&recs).into_iter().map(|v| v.to_vec()).collect();
            let joined: Vec<EpisodeRecord> = parts.concat();
            prop_assert_eq!(visit_stats(&joined).unwrap(), st);
        }
    }
}
