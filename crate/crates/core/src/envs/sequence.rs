//! A non-stationary environment: a task family driven through a schedule.

use crate::env::{Environment, TaskFamily};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::schedule::TaskSchedule;
use crate::types::StepOutcome;

/// Swaps the active task's dynamics at schedule boundaries and truncates the
/// in-flight episode there, so no episode straddles two tasks.
pub struct TaskSequence<F: TaskFamily> {
    family: F,
    schedule: TaskSchedule,
    env: F::Env,
    entry: usize,
    global_step: u64,
    in_episode: bool,
}

impl<F: TaskFamily> TaskSequence<F> {
    pub fn new(family: F, schedule: TaskSchedule) -> Result<Self> {
        for e in schedule.entries() {
            family.instantiate(&e.task)?;
        }
        let env = family.instantiate(&schedule.entries()[0].task)?;
        Ok(Self {
            family,
            schedule,
            env,
            entry: 0,
            global_step: 0,
            in_episode: false,
        })
    }

    pub fn family(&self) -> &F {
        &self.family
    }

    pub fn schedule(&self) -> &TaskSchedule {
        &self.schedule
    }

    pub fn current_task(&self) -> &str {
        &self.schedule.entries()[self.entry].task
    }

    pub fn entry(&self) -> usize {
        self.entry
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    /// True when the next step is the first of a schedule entry.
    pub fn is_boundary(&self) -> bool {
        self.schedule
            .position(self.global_step)
            .map(|p| p.is_boundary)
            .unwrap_or(false)
    }

    pub fn finished(&self) -> bool {
        self.global_step >= self.schedule.total_steps()
    }

    pub fn current_env(&self) -> &F::Env {
        &self.env
    }
}

impl<F: TaskFamily> Environment for TaskSequence<F> {
    fn observation_dim(&self) -> usize {
        self.env.observation_dim()
    }

    fn action_dim(&self) -> usize {
        self.env.action_dim()
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.in_episode = true;
        self.env.reset(rng)
    }

    fn step(&mut self, action: &[f64], rng: &mut Rng) -> Result<StepOutcome> {
        if self.finished() {
            return Err(Error::State("task schedule exhausted".into()));
        }
        if !self.in_episode {
            return Err(Error::State("stepped after episode end without reset".into()));
        }
        let mut out = self.env.step(action, rng)?;
        self.global_step += 1;
        let next = self.schedule.position(self.global_step).ok();
        let crossing = next.is_some_and(|p| p.is_boundary);
        if crossing {
            self.entry += 1;
            self.env = self.family.instantiate(&self.schedule.entries()[self.entry].task)?;
        }
        if (crossing || next.is_none()) && !out.terminated {
            out.truncated = true;
        }
        if out.terminated || out.truncated {
            self.in_episode = false;
        }
        Ok(out)
    }

    fn has_success(&self) -> bool {
        self.env.has_success()
    }
}
