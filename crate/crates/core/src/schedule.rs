use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub task: String,
    pub steps: u64,
}

/// Ordered task visits with per-visit step budgets. Task boundaries are known
/// to the learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSchedule {
    entries: Vec<ScheduleEntry>,
    /// Prefix sums: `starts[k]` is the first global step of entry `k`.
    starts: Vec<u64>,
    total: u64,
}

/// Where a global step falls in the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulePosition {
    pub entry: usize,
    pub is_boundary: bool,
}

impl TaskSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("task schedule has no entries"));
        }
        let mut starts = Vec::with_capacity(entries.len());
        let mut total = 0u64;
        for e in &entries {
            if e.steps == 0 {
                return Err(Error::config(format!("task '{}' has a zero step budget", e.task)));
            }
            starts.push(total);
            total += e.steps;
        }
        Ok(Self {
            entries,
            starts,
            total,
        })
    }

    /// Same step budget for every task in `tasks`.
    pub fn uniform<S: AsRef<str>>(tasks: &[S], steps: u64) -> Result<Self> {
        Self::new(
            tasks
                .iter()
                .map(|t| ScheduleEntry {
                    task: t.as_ref().to_string(),
                    steps,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_steps(&self) -> u64 {
        self.total
    }

    pub fn entry_start(&self, entry: usize) -> u64 {
        self.starts[entry]
    }

    pub fn position(&self, global_step: u64) -> Result<SchedulePosition> {
        if global_step >= self.total {
            return Err(Error::Range {
                what: "global step",
                index: global_step as usize,
                limit: self.total as usize,
            });
        }
        // Last entry whose start is <= global_step.
        let entry = self.starts.partition_point(|&s| s <= global_step) - 1;
        Ok(SchedulePosition {
            entry,
            is_boundary: self.starts[entry] == global_step,
        })
    }

    /// The task active at `global_step` and whether that step opens a new entry.
    pub fn advance(&self, global_step: u64) -> Result<(&str, bool)> {
        let pos = self.position(global_step)?;
        Ok((&self.entries[pos.entry].task, pos.is_boundary))
    }

    /// Distinct tasks trained on strictly before `entry`, in first-seen order.
    pub fn completed_tasks(&self, entry: usize) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for e in &self.entries[..entry.min(self.entries.len())] {
            if !seen.contains(&e.task.as_str()) {
                seen.push(&e.task);
            }
        }
        seen
    }

    /// How many times `entry`'s task appeared at earlier positions.
    pub fn visit_index(&self, entry: usize) -> usize {
        let task = &self.entries[entry].task;
        self.entries[..entry].iter().filter(|e| &e.task == task).count()
    }

    /// Distinct task ids in first-appearance order.
    pub fn tasks(&self) -> Vec<&str> {
        self.completed_tasks(self.entries.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> TaskSchedule {
        TaskSchedule::uniform(&["A", "B"], 10).unwrap()
    }

    #[test]
    fn advance_examples() {
        let s = ab();
        assert_eq!(s.advance(0).unwrap(), ("A", true));
        assert_eq!(s.advance(10).unwrap(), ("B", true));
        assert_eq!(s.advance(9).unwrap(), ("A", false));
        assert!(matches!(s.advance(20), Err(Error::Range { .. })));
    }

    #[test]
    fn rejects_degenerate_schedules() {
        assert!(TaskSchedule::new(vec![]).is_err());
        assert!(TaskSchedule::uniform(&["A"], 0).is_err());
    }

    #[test]
    fn completed_tasks_and_visits() {
        let s = TaskSchedule::uniform(&["n", "b", "n", "f"], 5).unwrap();
        assert_eq!(s.completed_tasks(0), Vec::<&str>::new());
        assert_eq!(s.completed_tasks(3), vec!["n", "b"]);
        assert_eq!(s.visit_index(2), 1);
        assert_eq!(s.visit_index(3), 0);
        assert_eq!(s.tasks(), vec!["n", "b", "f"]);
    }

    proptest! {
        #[test]
        fn every_step_maps_to_one_entry(budgets in proptest::collection::vec(1u64..20, 1..8)) {
            let entries = budgets.iter().enumerate()
                .map(|(i, &steps)| ScheduleEntry { task: format!("t{}", i % 3), steps })
                .collect();
            let s = TaskSchedule::new(entries).unwrap();
            let mut boundaries = 0;
            let mut counts = vec![0u64; s.len()];
            for g in 0..s.total_steps() {
                let p = s.position(g).unwrap();
                counts[p.entry] += 1;
                boundaries += p.is_boundary as usize;
            }
            prop_assert_eq!(boundaries, s.len());
            prop_assert_eq!(counts, budgets);
        }
    }
}
