//! The PPO update loop: batch preparation, minibatch epochs, KL early stop.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::nn::{Adam, GaussianPolicy, Mlp};
use crate::ppo::buffer::{segments, RolloutBuffer};
use crate::ppo::gae::{compute_gae, compute_returns};
use crate::ppo::loss::{clipped_policy_loss, entropy_term, normalize, value_loss};
use crate::rng::{self, Rng};
use crate::types::Transition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda_gae: f64,
    pub clip: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub update_interval: usize,
    pub target_kl: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda_gae: 0.95,
            clip: 0.2,
            value_coeff: 0.5,
            entropy_coeff: 0.01,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            epochs: 10,
            minibatch_size: 64,
            update_interval: 2048,
            target_kl: 0.02,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma,
            self.lambda_gae,
            self.clip,
            self.value_coeff,
            self.entropy_coeff,
            self.lr_actor,
            self.lr_critic,
            self.target_kl,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("ppo coefficients must be finite"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda_gae) {
            return Err(Error::config(format!("lambda_gae {} outside [0, 1]", self.lambda_gae)));
        }
        if self.clip <= 0.0 {
            return Err(Error::config("clip must be positive"));
        }
        if self.lr_actor < 0.0 || self.lr_critic < 0.0 || self.value_coeff < 0.0 || self.entropy_coeff < 0.0 {
            return Err(Error::config("learning rates and loss coefficients must be non-negative"));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.update_interval == 0 {
            return Err(Error::config("epochs, minibatch_size and update_interval must be at least 1"));
        }
        if self.target_kl <= 0.0 {
            return Err(Error::config("target_kl must be positive"));
        }
        Ok(())
    }
}

/// Column-oriented training data for one update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub cost_advantages: Vec<f64>,
    pub cost_returns: Vec<f64>,
}

impl TrainBatch {
    pub fn zeros(n: usize) -> Self {
        Self {
            states: vec![Vec::new(); n],
            actions: vec![Vec::new(); n],
            old_log_probs: vec![0.0; n],
            advantages: vec![0.0; n],
            returns: vec![0.0; n],
            cost_advantages: vec![0.0; n],
            cost_returns: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn append(&mut self, other: TrainBatch) {
        self.states.extend(other.states);
        self.actions.extend(other.actions);
        self.old_log_probs.extend(other.old_log_probs);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
        self.cost_advantages.extend(other.cost_advantages);
        self.cost_returns.extend(other.cost_returns);
    }
}

/// GAE advantages and discounted returns for both the reward and the cost
/// channel. Values come from the cache on each transition; the bootstrap at a
/// cut segment is the critics' estimate of the last next-state.
pub fn prepare_batch(
    transitions: &[Transition],
    critic: &Mlp,
    cost_critic: &Mlp,
    gamma: f64,
    lambda: f64,
) -> Result<TrainBatch> {
    let mut batch = TrainBatch::default();
    for seg in segments(transitions) {
        let ts = &transitions[seg.start..seg.end];
        let last = &ts[ts.len() - 1];
        let (boot, cost_boot) = if seg.terminated {
            (0.0, 0.0)
        } else {
            (critic.value(&last.next_state)?, cost_critic.value(&last.next_state)?)
        };
        let rewards: Vec<f64> = ts.iter().map(|t| t.reward).collect();
        let costs: Vec<f64> = ts.iter().map(|t| t.cost).collect();
        let values: Vec<f64> = ts.iter().map(|t| t.value).collect();
        let cost_values: Vec<f64> = ts.iter().map(|t| t.cost_value).collect();
        batch.advantages.extend(compute_gae(&rewards, &values, boot, gamma, lambda)?);
        batch.returns.extend(compute_returns(&rewards, gamma, boot));
        batch
            .cost_advantages
            .extend(compute_gae(&costs, &cost_values, cost_boot, gamma, lambda)?);
        batch.cost_returns.extend(compute_returns(&costs, gamma, cost_boot));
        for t in ts {
            batch.states.push(t.state.clone());
            batch.actions.push(t.action.clone());
            batch.old_log_probs.push(t.log_prob);
        }
    }
    Ok(batch)
}

/// An extra term in the actor loss, evaluated on one minibatch.
pub trait ActorPenalty {
    /// Adds the term's gradient into `grad` and returns its value.
    fn apply(&self, policy: &GaussianPolicy, batch: &TrainBatch, idx: &[usize], grad: &mut [f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoPenalty;

impl ActorPenalty for NoPenalty {
    fn apply(&self, _: &GaussianPolicy, _: &TrainBatch, _: &[usize], _: &mut [f64]) -> Result<f64> {
        Ok(0.0)
    }
}

/// Adapts a closure to [`ActorPenalty`].
pub struct FnPenalty<F>(pub F);

impl<F> ActorPenalty for FnPenalty<F>
where
    F: Fn(&GaussianPolicy, &TrainBatch, &[usize], &mut [f64]) -> Result<f64>,
{
    fn apply(&self, policy: &GaussianPolicy, batch: &TrainBatch, idx: &[usize], grad: &mut [f64]) -> Result<f64> {
        (self.0)(policy, batch, idx, grad)
    }
}

impl<P: ActorPenalty + ?Sized> ActorPenalty for &P {
    fn apply(&self, policy: &GaussianPolicy, batch: &TrainBatch, idx: &[usize], grad: &mut [f64]) -> Result<f64> {
        (**self).apply(policy, batch, idx, grad)
    }
}

/// Surrogate + `entropy_coeff` × entropy term + penalty, with its gradient.
/// `batch` advantages are used as given (normalise beforehand).
pub fn actor_objective(
    policy: &GaussianPolicy,
    batch: &TrainBatch,
    idx: &[usize],
    cfg: &PpoConfig,
    penalty: &dyn ActorPenalty,
) -> Result<(f64, Vec<f64>, f64)> {
    let sur = clipped_policy_loss(policy, batch, &batch.advantages, idx, cfg.clip)?;
    let mut grad = sur.grad;
    let mut loss = sur.loss;
    if cfg.entropy_coeff != 0.0 {
        let (ent, ent_grad) = entropy_term(policy);
        loss += cfg.entropy_coeff * ent;
        for (g, e) in grad.iter_mut().zip(&ent_grad) {
            *g += cfg.entropy_coeff * e;
        }
    }
    loss += penalty.apply(policy, batch, idx, &mut grad)?;
    Ok((loss, grad, sur.clip_fraction))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub actor_loss: f64,
    pub value_loss: f64,
    pub cost_value_loss: f64,
    pub entropy: f64,
    /// Mean KL estimate between the policy before and after the update.
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub epochs: usize,
}

/// Policy, reward critic and cost critic with their optimisers.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub cost_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    cost_opt: Adam,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], cfg: &PpoConfig, rng: &mut Rng) -> Result<Self> {
        let policy = GaussianPolicy::new(obs_dim, hidden, action_dim, rng)?;
        let mut widths = vec![obs_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let critic = Mlp::new(widths.clone(), rng)?;
        let cost_critic = Mlp::new(widths, rng)?;
        Ok(Self::from_parts(policy, critic, cost_critic, cfg))
    }

    pub fn from_parts(policy: GaussianPolicy, critic: Mlp, cost_critic: Mlp, cfg: &PpoConfig) -> Self {
        Self {
            actor_opt: Adam::new(policy.param_count(), cfg.lr_actor),
            critic_opt: Adam::new(critic.params().len(), cfg.lr_critic),
            cost_opt: Adam::new(cost_critic.params().len(), cfg.lr_critic),
            policy,
            critic,
            cost_critic,
        }
    }

    /// Samples an action and fills in everything a [`Transition`] caches.
    pub fn act(&self, state: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64, f64, f64)> {
        let (action, lp) = self.policy.sample(state, rng)?;
        let v = self.critic.value(state)?;
        let vc = self.cost_critic.value(state)?;
        Ok((action, lp, v, vc))
    }

    /// Runs the epoch / minibatch loop on `batch`. Advantages are normalised
    /// here, per batch, for both channels.
    pub fn update(
        &mut self,
        batch: &TrainBatch,
        cfg: &PpoConfig,
        penalty: &dyn ActorPenalty,
        rng: &mut Rng,
    ) -> Result<UpdateReport> {
        if batch.is_empty() {
            return Err(Error::contract("ppo update on an empty batch"));
        }
        self.actor_opt.lr = cfg.lr_actor;
        self.critic_opt.lr = cfg.lr_critic;
        self.cost_opt.lr = cfg.lr_critic;
        let mut work = batch.clone();
        work.advantages = normalize(&batch.advantages);
        work.cost_advantages = normalize(&batch.cost_advantages);

        let start_log_probs = batch
            .states
            .iter()
            .zip(&batch.actions)
            .map(|(s, a)| self.policy.log_prob(s, a))
            .collect::<Result<Vec<_>>>()?;

        let n = work.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut report = UpdateReport::default();
        let mut sums = [0.0; 4];
        let mut minibatches = 0usize;
        for epoch in 0..cfg.epochs {
            rng::shuffle(rng, &mut order);
            for idx in order.chunks(cfg.minibatch_size) {
                let (loss, grad, clip_frac) = actor_objective(&self.policy, &work, idx, cfg, penalty)?;
                if !loss.is_finite() {
                    return Err(Error::numeric("actor loss is not finite"));
                }
                check_finite("actor gradient", &grad)?;
                self.actor_opt.step(self.policy.params_mut(), &grad);

                let vl = regress(&mut self.critic, &mut self.critic_opt, &work.states, &work.returns, idx, cfg.value_coeff)?;
                let cl = regress(
                    &mut self.cost_critic,
                    &mut self.cost_opt,
                    &work.states,
                    &work.cost_returns,
                    idx,
                    cfg.value_coeff,
                )?;
                sums[0] += loss;
                sums[1] += vl;
                sums[2] += cl;
                sums[3] += clip_frac;
                minibatches += 1;
            }
            report.epochs = epoch + 1;
            report.approx_kl = self.kl_from(&work, &start_log_probs)?;
            if report.approx_kl > cfg.target_kl {
                break;
            }
        }
        let m = minibatches as f64;
        report.actor_loss = sums[0] / m;
        report.value_loss = sums[1] / m;
        report.cost_value_loss = sums[2] / m;
        report.clip_fraction = sums[3] / m;
        report.entropy = self.policy.entropy();
        Ok(report)
    }

    /// Prepares the buffer's batch, updates, and clears the buffer.
    pub fn update_from_buffer(
        &mut self,
        buffer: &mut RolloutBuffer,
        cfg: &PpoConfig,
        penalty: &dyn ActorPenalty,
        rng: &mut Rng,
    ) -> Result<UpdateReport> {
        if buffer.is_empty() {
            return Err(Error::contract("ppo update on an empty buffer"));
        }
        let batch = prepare_batch(buffer.transitions(), &self.critic, &self.cost_critic, cfg.gamma, cfg.lambda_gae)?;
        buffer.clear();
        self.update(&batch, cfg, penalty, rng)
    }

    /// `mean[(r - 1) - log r]` with `r` the ratio of current to reference
    /// probability; non-negative and zero iff nothing moved.
    fn kl_from(&self, batch: &TrainBatch, reference: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for ((s, a), lp_ref) in batch.states.iter().zip(&batch.actions).zip(reference) {
            let log_ratio = self.policy.log_prob(s, a)? - lp_ref;
            total += log_ratio.exp_m1() - log_ratio;
        }
        Ok(total / batch.len() as f64)
    }
}

/// One optimiser step of `coeff` × MSE on the minibatch; returns the MSE.
fn regress(net: &mut Mlp, opt: &mut Adam, states: &[Vec<f64>], targets: &[f64], idx: &[usize], coeff: f64) -> Result<f64> {
    let mut acts = Vec::with_capacity(idx.len());
    let mut preds = Vec::with_capacity(idx.len());
    let mut ts = Vec::with_capacity(idx.len());
    for &i in idx {
        let a = net.forward_cached(&states[i])?;
        preds.push(a.output()[0]);
        ts.push(targets[i]);
        acts.push(a);
    }
    let (loss, d) = value_loss(&preds, &ts)?;
    let mut grad = vec![0.0; net.params().len()];
    for (a, di) in acts.iter().zip(&d) {
        net.backward(a, &[coeff * di], &mut grad);
    }
    check_finite("critic gradient", &grad)?;
    opt.step(net.params_mut(), &grad);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::rng::{Purpose, RunSeed};

    fn setup(seed: u64, n: usize) -> (ActorCritic, TrainBatch, Rng) {
        let cfg = PpoConfig::default();
        let mut rng = RunSeed(seed).stream(Purpose::Init);
        let ac = ActorCritic::new(2, 1, &[6, 6], &cfg, &mut rng).unwrap();
        let mut batch = TrainBatch::zeros(n);
        for i in 0..n {
            batch.states[i] = vec![rng::normal(&mut rng), rng::normal(&mut rng)];
            let (a, lp) = ac.policy.sample(&batch.states[i], &mut rng).unwrap();
            batch.actions[i] = a;
            batch.old_log_probs[i] = lp;
            batch.advantages[i] = rng::normal(&mut rng);
            batch.returns[i] = rng::normal(&mut rng);
            batch.cost_advantages[i] = rng::normal(&mut rng);
            batch.cost_returns[i] = rng::normal(&mut rng).abs();
        }
        (ac, batch, rng)
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (mut ac, batch, mut rng) = setup(1, 4);
        let cfg = PpoConfig {
            lr_actor: 0.0,
            lr_critic: 0.0,
            epochs: 1,
            ..PpoConfig::default()
        };
        let before = ac.clone();
        let report = ac.update(&batch, &cfg, &NoPenalty, &mut rng).unwrap();
        assert_eq!(ac.policy, before.policy);
        assert_eq!(ac.critic, before.critic);
        assert_eq!(report.approx_kl, 0.0);
    }

    #[test]
    fn zero_advantages_leave_the_mean_path_still() {
        let (mut ac, mut batch, mut rng) = setup(2, 16);
        batch.advantages = vec![0.0; 16];
        let cfg = PpoConfig {
            entropy_coeff: 0.0,
            ..PpoConfig::default()
        };
        let before = ac.policy.clone();
        ac.update(&batch, &cfg, &NoPenalty, &mut rng).unwrap();
        let n = before.param_count() - before.action_dim();
        for (a, b) in ac.policy.params()[..n].iter().zip(&before.params()[..n]) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn tiny_steps_descend() {
        let (ac, mut batch, _) = setup(3, 4);
        batch.advantages = normalize(&batch.advantages);
        let cfg = PpoConfig::default();
        let idx = [0, 1, 2, 3];
        let mut policy = ac.policy.clone();
        let (mut prev, ..) = actor_objective(&policy, &batch, &idx, &cfg, &NoPenalty).unwrap();
        for _ in 0..10 {
            let (_, g, _) = actor_objective(&policy, &batch, &idx, &cfg, &NoPenalty).unwrap();
            for (p, gi) in policy.params_mut().iter_mut().zip(&g) {
                *p -= 1e-4 * gi;
            }
            let (now, ..) = actor_objective(&policy, &batch, &idx, &cfg, &NoPenalty).unwrap();
            assert!(now < prev, "{now} !< {prev}");
            prev = now;
        }
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let (ac, mut batch, mut rng) = setup(4, 4);
        batch.advantages = normalize(&batch.advantages);
        // Move away from theta_old so ratios differ from 1 but stay inside the clip range.
        let mut policy = ac.policy.clone();
        for p in policy.params_mut() {
            *p += 0.01 * rng::normal(&mut rng);
        }
        let anchor: Vec<f64> = policy.params().iter().map(|p| p + 0.3).collect();
        let quad = FnPenalty(move |pol: &GaussianPolicy, _: &TrainBatch, _: &[usize], g: &mut [f64]| {
            let mut v = 0.0;
            for ((gi, p), a) in g.iter_mut().zip(pol.params()).zip(&anchor) {
                v += 0.7 * (p - a) * (p - a);
                *gi += 1.4 * (p - a);
            }
            Ok(v)
        });
        let cfg = PpoConfig::default();
        let idx = [0, 1, 2, 3];
        let (_, g, _) = actor_objective(&policy, &batch, &idx, &cfg, &quad).unwrap();
        let widths = policy.shape().widths().to_vec();
        let r = grad_check(
            |p| {
                let pol = GaussianPolicy::from_params(widths.clone(), p.to_vec())?;
                Ok(actor_objective(&pol, &batch, &idx, &cfg, &quad)?.0)
            },
            policy.params(),
            &g,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn empty_batch_is_rejected() {
        let (mut ac, _, mut rng) = setup(5, 1);
        let mut buf = RolloutBuffer::new(8);
        assert!(matches!(
            ac.update_from_buffer(&mut buf, &PpoConfig::default(), &NoPenalty, &mut rng),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn batch_preparation_bootstraps_only_cut_segments() {
        let critic = Mlp::from_params(vec![1, 1], vec![0.0, 3.0]).unwrap();
        let cost_critic = Mlp::from_params(vec![1, 1], vec![0.0, 0.0]).unwrap();
        let t = |terminated, truncated| Transition {
            state: vec![0.0],
            action: vec![0.0],
            reward: 1.0,
            cost: 0.0,
            next_state: vec![0.0],
            terminated,
            truncated,
            log_prob: 0.0,
            value: 0.0,
            cost_value: 0.0,
        };
        let b = prepare_batch(&[t(true, false), t(false, true)], &critic, &cost_critic, 0.5, 1.0).unwrap();
        assert_eq!(b.returns, vec![1.0, 2.5]);
        assert_eq!(b.cost_returns, vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        let bad = PpoConfig {
            gamma: 1.0,
            ..PpoConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PpoConfig {
            epochs: 0,
            ..PpoConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
