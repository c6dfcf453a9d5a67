//! Constraint handling: cost-shaped reward, Lagrangian and PID multipliers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::GaussianPolicy;
use crate::ppo::loss::weighted_surrogates;
use crate::ppo::update::{ActorPenalty, TrainBatch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingConfig {
    pub beta: f64,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self { beta: 5.0 }
    }
}

/// `r - beta * c`.
pub fn shape_reward(reward: f64, cost: f64, beta: f64) -> f64 {
    reward - beta * cost
}

/// One projected dual-ascent step: `max(0, lambda + lr (J_C - d))`.
pub fn lagrangian_update(lambda: f64, episodic_cost: f64, limit: f64, lr: f64) -> f64 {
    (lambda + lr * (episodic_cost - limit)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_cost: f64,
}

/// PID multiplier update; mutates the integral and previous-cost memory.
pub fn pid_update(state: &mut PidState, gains: PidGains, episodic_cost: f64, limit: f64) -> f64 {
    let delta = episodic_cost - limit;
    let deriv = (episodic_cost - state.prev_cost).max(0.0);
    state.integral = (state.integral + delta).max(0.0);
    state.prev_cost = episodic_cost;
    (gains.kp * delta + gains.ki * state.integral + gains.kd * deriv).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierMode {
    Gradient,
    Pid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    /// Episodic cost limit `d`.
    pub cost_limit: f64,
    pub lr_lambda: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub initial_lambda: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            cost_limit: 25.0,
            lr_lambda: 0.034,
            kp: 1.0,
            ki: 0.01,
            kd: 0.0,
            initial_lambda: 0.0,
        }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.cost_limit, self.lr_lambda, self.kp, self.ki, self.kd, self.initial_lambda];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("constraint settings must be finite and non-negative"));
        }
        if self.lr_lambda == 0.0 {
            return Err(Error::config("lr_lambda must be positive"));
        }
        Ok(())
    }

    pub fn gains(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
        }
    }
}

/// The Lagrange multiplier and whatever state its update rule keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintController {
    pub mode: MultiplierMode,
    pub config: ConstraintConfig,
    pub lambda: f64,
    pub pid: PidState,
}

impl ConstraintController {
    pub fn new(mode: MultiplierMode, config: ConstraintConfig) -> Self {
        Self {
            mode,
            lambda: config.initial_lambda,
            config,
            pid: PidState::default(),
        }
    }

    pub fn limit(&self) -> f64 {
        self.config.cost_limit
    }

    /// Feeds one episodic-cost estimate and returns the new multiplier.
    pub fn observe(&mut self, episodic_cost: f64) -> f64 {
        self.lambda = match self.mode {
            MultiplierMode::Gradient => {
                lagrangian_update(self.lambda, episodic_cost, self.config.cost_limit, self.config.lr_lambda)
            }
            MultiplierMode::Pid => pid_update(&mut self.pid, self.config.gains(), episodic_cost, self.config.cost_limit),
        };
        self.lambda
    }

    pub fn penalty(&self, clip: f64) -> LagrangianPenalty {
        LagrangianPenalty {
            lambda: self.lambda,
            clip,
        }
    }
}

/// Turns the plain PPO actor loss `-S_R` into the normalised Lagrangian
/// `(-S_R + lambda * S_C) / (1 + lambda)`, where `S_R`, `S_C` are the clipped
/// surrogates on reward and cost advantages. The returned term is
/// `lambda / (1 + lambda) * (S_R + S_C)`; it vanishes at `lambda = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianPenalty {
    pub lambda: f64,
    pub clip: f64,
}

impl ActorPenalty for LagrangianPenalty {
    fn apply(&self, policy: &GaussianPolicy, batch: &TrainBatch, idx: &[usize], grad: &mut [f64]) -> Result<f64> {
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        let scale = self.lambda / (1.0 + self.lambda);
        let sur = weighted_surrogates(
            policy,
            batch,
            &[(&batch.cost_advantages, -scale), (&batch.advantages, -scale)],
            idx,
            self.clip,
        )?;
        for (g, s) in grad.iter_mut().zip(&sur.grad) {
            *g += s;
        }
        Ok(sur.loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::rng::{self, Purpose, RunSeed};
    use proptest::prelude::*;

    #[test]
    fn shaping_examples() {
        assert_eq!(shape_reward(2.0, 0.5, 5.0), -0.5);
        assert_eq!(shape_reward(3.25, 0.0, 5.0), 3.25);
        assert_eq!(ShapingConfig::default().beta, 5.0);
    }

    #[test]
    fn lagrangian_examples() {
        assert_eq!(lagrangian_update(0.0, 25.0, 25.0, 0.1), 0.0);
        assert!((lagrangian_update(0.0, 30.0, 25.0, 0.1) - 0.5).abs() < 1e-15);
        assert_eq!(lagrangian_update(0.1, 0.0, 25.0, 0.1), 0.0);
    }

    #[test]
    fn pid_examples() {
        let gains = PidGains { kp: 1.0, ki: 0.01, kd: 0.0 };
        let mut st = PidState {
            integral: 0.0,
            prev_cost: 25.0,
        };
        assert_eq!(pid_update(&mut st, gains, 25.0, 25.0), 0.0);

        let mut st = PidState {
            integral: 0.0,
            prev_cost: 30.0,
        };
        assert_eq!(pid_update(&mut st, gains, 30.0, 25.0), 5.05);
        assert_eq!(st.integral, 5.0);
    }

    #[test]
    fn inactive_multiplier_contributes_nothing() {
        let pol = GaussianPolicy::from_params(vec![1, 1], vec![0.3, 0.1, -0.5]).unwrap();
        let batch = TrainBatch {
            states: vec![vec![1.0]],
            actions: vec![vec![0.2]],
            old_log_probs: vec![-1.0],
            cost_advantages: vec![2.0],
            ..TrainBatch::zeros(1)
        };
        let mut g = vec![0.0; 3];
        let p = LagrangianPenalty { lambda: 0.0, clip: 0.2 };
        assert_eq!(p.apply(&pol, &batch, &[0], &mut g).unwrap(), 0.0);
        assert_eq!(g, vec![0.0; 3]);
        let p = LagrangianPenalty { lambda: 3.0, clip: 0.2 };
        let batch = TrainBatch {
            cost_advantages: vec![0.0],
            ..batch
        };
        p.apply(&pol, &batch, &[0], &mut g).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn two_transition_penalty_matches_direct_evaluation() {
        let pol = GaussianPolicy::from_params(vec![1, 1], vec![0.5, 0.0, 0.0]).unwrap();
        let states = vec![vec![1.0], vec![-1.0]];
        let actions = vec![vec![0.7], vec![-0.2]];
        let adv_c = [1.5, -0.5];
        // Old log-probs chosen so the ratios are 1.1 and 0.7.
        let lp = |s: f64, a: f64| {
            let m = 0.5 * s;
            -0.5 * (a - m) * (a - m) - 0.5 * (2.0 * std::f64::consts::PI).ln()
        };
        let old = vec![lp(1.0, 0.7) - 1.1f64.ln(), lp(-1.0, -0.2) - 0.7f64.ln()];
        let batch = TrainBatch {
            states,
            actions,
            old_log_probs: old,
            advantages: vec![0.4, 1.0],
            cost_advantages: adv_c.to_vec(),
            ..TrainBatch::zeros(2)
        };
        // cost: min(1.1 * 1.5, 1.1 * 1.5) = 1.65; min(0.7 * -0.5, 0.8 * -0.5) = -0.4
        // reward: min(1.1 * 0.4, 1.1 * 0.4) = 0.44; min(0.7 * 1.0, 0.8 * 1.0) = 0.7
        let expected = 1.0 / 2.0 * ((1.65 - 0.4) / 2.0 + (0.44 + 0.7) / 2.0);
        let mut g = vec![0.0; 3];
        let v = LagrangianPenalty { lambda: 1.0, clip: 0.2 }
            .apply(&pol, &batch, &[0, 1], &mut g)
            .unwrap();
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let mut rng = RunSeed(9).stream(Purpose::Init);
        let pol = GaussianPolicy::new(2, &[5], 1, &mut rng).unwrap();
        let mut batch = TrainBatch::zeros(4);
        for i in 0..4 {
            batch.states[i] = vec![rng::normal(&mut rng), rng::normal(&mut rng)];
            let (a, lp) = pol.sample(&batch.states[i], &mut rng).unwrap();
            batch.actions[i] = a;
            batch.old_log_probs[i] = lp + 0.05 * rng::normal(&mut rng);
            batch.cost_advantages[i] = rng::normal(&mut rng);
            batch.advantages[i] = rng::normal(&mut rng);
        }
        let pen = LagrangianPenalty { lambda: 2.5, clip: 0.2 };
        let mut g = vec![0.0; pol.param_count()];
        pen.apply(&pol, &batch, &[0, 1, 2, 3], &mut g).unwrap();
        let widths = pol.shape().widths().to_vec();
        let r = grad_check(
            |p| {
                let q = GaussianPolicy::from_params(widths.clone(), p.to_vec())?;
                pen.apply(&q, &batch, &[0, 1, 2, 3], &mut vec![0.0; p.len()])
            },
            pol.params(),
            &g,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
    }

    proptest! {
        #[test]
        fn multipliers_never_go_negative(costs in prop::collection::vec(0.0f64..100.0, 1..50), limit in 0.0f64..50.0) {
            let mut grad = ConstraintController::new(MultiplierMode::Gradient, ConstraintConfig { cost_limit: limit, ..Default::default() });
            let mut pid = ConstraintController::new(MultiplierMode::Pid, ConstraintConfig { cost_limit: limit, kd: 0.5, ..Default::default() });
            for c in costs {
                prop_assert!(grad.observe(c) >= 0.0);
                prop_assert!(pid.observe(c) >= 0.0);
                prop_assert!(pid.pid.integral >= 0.0);
            }
        }

        #[test]
        fn pure_proportional(cost in -100.0f64..100.0, limit in 0.0f64..50.0, kp in 0.0f64..10.0, prev in 0.0f64..50.0, integral in 0.0f64..50.0) {
            let mut st = PidState { integral, prev_cost: prev };
            let lam = pid_update(&mut st, PidGains { kp, ki: 0.0, kd: 0.0 }, cost, limit);
            prop_assert_eq!(lam, (kp * (cost - limit)).max(0.0));
        }

        #[test]
        fn shaping_is_linear(r in -10.0f64..10.0, c in 0.0f64..10.0) {
            prop_assert_eq!(shape_reward(r, c, 0.0), r);
        }
    }
}
