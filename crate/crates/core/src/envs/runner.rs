//! A point-mass "runner" rewarded for eastward progress and charged for
//! exceeding a velocity limit. Damage changes the actuation gain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, TaskFamily};
use crate::error::{check_finite, check_len, Error, Result};
use crate::rng::{self, Rng};
use crate::schedule::TaskSchedule;
use crate::types::StepOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunnerParams {
    /// Actuation multiplier.
    pub gain: f64,
    pub drag: f64,
    /// Integration step in seconds.
    pub dt: f64,
    /// Velocity above which a step costs 1.
    pub v_limit: f64,
    pub action_penalty: f64,
    pub episode_len: usize,
    pub obs_noise_std: f64,
}

impl Default for RunnerParams {
    fn default() -> Self {
        Self {
            gain: 1.0,
            drag: 0.1,
            dt: 0.1,
            v_limit: 0.5,
            action_penalty: 0.1,
            episode_len: 200,
            obs_noise_std: 0.0,
        }
    }
}

impl RunnerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gain != 0.0
            && self.gain.is_finite()
            && self.drag >= 0.0
            && self.dt > 0.0
            && self.dt <= 1.0
            && self.v_limit > 0.0
            && self.action_penalty >= 0.0
            && self.episode_len > 0
            && self.obs_noise_std >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid runner parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunnerState {
    /// Position, metres.
    pub x: f64,
    /// Velocity, metres per second.
    pub v: f64,
}

/// Noise-free runner dynamics. Returns `(next_state, reward, cost)`.
///
/// The action is clipped to `[-1, 1]` before it reaches the actuator.
pub fn runner_step(
    params: &RunnerParams,
    state: RunnerState,
    action: f64,
) -> Result<(RunnerState, f64, f64)> {
    if !(state.x.is_finite() && state.v.is_finite() && action.is_finite()) {
        return Err(Error::contract("runner state and action must be finite"));
    }
    let a = action.clamp(-1.0, 1.0);
    let v = state.v + (params.gain * a - params.drag * state.v) * params.dt;
    let x = state.x + v * params.dt;
    let reward = (x - state.x) / params.dt - params.action_penalty * a * a;
    let cost = if v > params.v_limit { 1.0 } else { 0.0 };
    Ok((RunnerState { x, v }, reward, cost))
}

#[derive(Debug, Clone)]
pub struct RunnerEnv {
    params: RunnerParams,
    state: RunnerState,
    t: usize,
    done: bool,
}

impl RunnerEnv {
    pub fn new(params: RunnerParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: RunnerState::default(),
            t: 0,
            done: true,
        })
    }

    pub fn params(&self) -> &RunnerParams {
        &self.params
    }

    pub fn state(&self) -> RunnerState {
        self.state
    }

    fn observe(&self, rng: &mut Rng) -> Vec<f64> {
        // Velocity in units of the limit; position is not observed.
        let mut obs = self.state.v / self.params.v_limit;
        if self.params.obs_noise_std > 0.0 {
            obs += self.params.obs_noise_std * rng::normal(rng);
        }
        vec![obs]
    }
}

impl Environment for RunnerEnv {
    fn observation_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.state = RunnerState::default();
        self.t = 0;
        self.done = false;
        self.observe(rng)
    }

    fn step(&mut self, action: &[f64], rng: &mut Rng) -> Result<StepOutcome> {
        check_len("runner action", 1, action.len())?;
        check_finite("runner action", action)?;
        if self.done {
            return Err(Error::State("runner stepped after episode end without reset".into()));
        }
        let (next, reward, cost) = runner_step(&self.params, self.state, action[0])?;
        self.state = next;
        self.t += 1;
        let truncated = self.t >= self.params.episode_len;
        self.done = truncated;
        Ok(StepOutcome {
            next_state: self.observe(rng),
            reward,
            cost,
            terminated: false,
            truncated,
            success: false,
        })
    }
}

/// Nominal, front-damaged and back-damaged runners.
#[derive(Debug, Clone, PartialEq)]
pub struct RunnerFamily {
    pub tasks: BTreeMap<String, RunnerParams>,
}

impl RunnerFamily {
    pub const DEFAULT_SEQUENCE: [&'static str; 8] = [
        "nominal", "back", "nominal", "front", "back", "nominal", "front", "nominal",
    ];

    /// Damage variants derived from `base`: front weakens actuation to 0.4x,
    /// back strengthens it to 1.6x and doubles drag.
    pub fn from_base(base: &RunnerParams) -> Self {
        let mut tasks = BTreeMap::new();
        tasks.insert("nominal".to_string(), base.clone());
        tasks.insert(
            "front".to_string(),
            RunnerParams {
                gain: 0.4 * base.gain,
                ..base.clone()
            },
        );
        tasks.insert(
            "back".to_string(),
            RunnerParams {
                gain: 1.6 * base.gain,
                drag: 2.0 * base.drag,
                ..base.clone()
            },
        );
        Self { tasks }
    }

    pub fn default_schedule(steps_per_task: u64) -> Result<TaskSchedule> {
        TaskSchedule::uniform(&Self::DEFAULT_SEQUENCE, steps_per_task)
    }
}

impl Default for RunnerFamily {
    fn default() -> Self {
        Self::from_base(&RunnerParams::default())
    }
}

impl TaskFamily for RunnerFamily {
    type Env = RunnerEnv;

    fn instantiate(&self, task: &str) -> Result<RunnerEnv> {
        let params = self
            .tasks
            .get(task)
            .ok_or_else(|| Error::config(format!("runner has no task '{task}'")))?;
        RunnerEnv::new(params.clone())
    }

    fn task_ids(&self) -> Vec<String> {
        self.tasks.keys().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RunSeed};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn hand_evaluated_step() {
        let p = RunnerParams::default();
        let (s, r, c) = runner_step(&p, RunnerState::default(), 1.0).unwrap();
        assert!(close(s.v, 0.1));
        assert!(close(s.x, 0.01));
        assert!(close(r, 0.0));
        assert_eq!(c, 0.0);

        let tight = RunnerParams {
            v_limit: 0.05,
            ..p.clone()
        };
        let (_, _, c) = runner_step(&tight, RunnerState::default(), 1.0).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let p = RunnerParams::default();
        let start = RunnerState { x: 3.0, v: 0.0 };
        let (s, r, c) = runner_step(&p, start, 0.0).unwrap();
        assert_eq!(s, start);
        assert_eq!((r, c), (0.0, 0.0));
    }

    #[test]
    fn actions_saturate() {
        let p = RunnerParams::default();
        let a = runner_step(&p, RunnerState::default(), 5.0).unwrap();
        let b = runner_step(&p, RunnerState::default(), 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let p = RunnerParams::default();
        assert!(runner_step(&p, RunnerState::default(), f64::NAN).is_err());
        let mut env = RunnerEnv::new(p).unwrap();
        let mut rng = RunSeed(0).stream(Purpose::Environment);
        env.reset(&mut rng);
        assert!(matches!(env.step(&[], &mut rng), Err(Error::Dimension { .. })));
    }

    #[test]
    fn step_after_truncation_needs_reset() {
        let p = RunnerParams {
            episode_len: 2,
            ..Default::default()
        };
        let mut env = RunnerEnv::new(p).unwrap();
        let mut rng = RunSeed(0).stream(Purpose::Environment);
        assert!(matches!(env.step(&[0.0], &mut rng), Err(Error::State(_))));
        env.reset(&mut rng);
        assert!(!env.step(&[0.0], &mut rng).unwrap().truncated);
        assert!(env.step(&[0.0], &mut rng).unwrap().truncated);
        assert!(matches!(env.step(&[0.0], &mut rng), Err(Error::State(_))));
    }

    #[test]
    fn task_set() {
        let fam = RunnerFamily::default();
        assert_eq!(fam.tasks["nominal"].gain, 1.0);
        let (n, f, b) = (&fam.tasks["nominal"], &fam.tasks["front"], &fam.tasks["back"]);
        assert_eq!(f.gain, 0.4);
        assert_eq!(b.gain, 1.6);
        assert_eq!(b.drag, 0.2);
        assert!(n != f && n != b && f != b);
        assert_eq!(RunnerFamily::default_schedule(10).unwrap().len(), 8);
        assert!(fam.instantiate("left-leg").is_err());
    }

    #[test]
    fn cost_is_binary_indicator_and_deterministic() {
        let p = RunnerParams::default();
        let mut rng = RunSeed(3).stream(Purpose::Policy);
        let mut s = RunnerState::default();
        for _ in 0..500 {
            let a = rng::uniform(&mut rng, -1.5, 1.5);
            let (n1, _, c) = runner_step(&p, s, a).unwrap();
            let (n2, _, _) = runner_step(&p, s, a).unwrap();
            assert_eq!(n1, n2);
            assert_eq!(c, if n1.v > p.v_limit { 1.0 } else { 0.0 });
            s = n1;
        }
    }
}
