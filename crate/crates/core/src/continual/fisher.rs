//! Diagonal Fisher estimates from the frozen policy's own rollouts.

use serde::{Deserialize, Serialize};

use crate::continual::ewc::{EwcEntry, EwcMemory};
use crate::env::Environment;
use crate::error::{check_len, Error, Result};
use crate::nn::GaussianPolicy;
use crate::rng::Rng;

/// How each rollout sample is weighted in the Fisher average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherWeighting {
    /// Every sample counts once.
    Plain,
    /// A sample with cost `c` counts `1 / (1 + c)`.
    CostWeighted,
}

pub fn fisher_weights(costs: &[f64], weighting: FisherWeighting) -> Vec<f64> {
    match weighting {
        FisherWeighting::Plain => vec![1.0; costs.len()],
        FisherWeighting::CostWeighted => costs.iter().map(|c| 1.0 / (1.0 + c)).collect(),
    }
}

/// `F_i = (1/N) sum_n w_n (d log pi(a_n|s_n) / d theta_i)^2`.
pub fn estimate_fisher(policy: &GaussianPolicy, samples: &[(Vec<f64>, Vec<f64>)], weights: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::contract("fisher estimate needs at least one sample"));
    }
    check_len("fisher weights", samples.len(), weights.len())?;
    let mut fisher = vec![0.0; policy.param_count()];
    for ((s, a), w) in samples.iter().zip(weights) {
        let (_, score) = policy.log_prob_and_grad(s, a)?;
        for (f, g) in fisher.iter_mut().zip(&score) {
            *f += w * g * g;
        }
    }
    let n = samples.len() as f64;
    for f in &mut fisher {
        *f /= n;
    }
    Ok(fisher)
}

/// Anchors the current parameters and appends their Fisher, estimated from
/// one episode of the frozen policy in `env` (the task that just ended),
/// truncated at `max_samples`.
pub fn finish_task<E: Environment + ?Sized>(
    memory: &mut EwcMemory,
    policy: &GaussianPolicy,
    task_id: &str,
    env: &mut E,
    max_samples: usize,
    weighting: FisherWeighting,
    rng: &mut Rng,
) -> Result<()> {
    if max_samples == 0 {
        return Err(Error::contract("fisher sample budget must be positive"));
    }
    let mut samples = Vec::new();
    let mut costs = Vec::new();
    let mut state = env.reset(rng);
    while samples.len() < max_samples {
        let (action, _) = policy.sample(&state, rng)?;
        let out = env.step(&action, rng)?;
        samples.push((state, action));
        costs.push(out.cost);
        if out.terminated || out.truncated {
            break;
        }
        state = out.next_state;
    }
    let fisher = estimate_fisher(policy, &samples, &fisher_weights(&costs, weighting))?;
    memory.push(EwcEntry {
        task_id: task_id.to_string(),
        theta_star: policy.params().to_vec(),
        fisher,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{RunnerFamily, RunnerParams};
    use crate::env::TaskFamily;
    use crate::rng::{self, Purpose, RunSeed};
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let pol = GaussianPolicy::from_params(vec![1, 1], vec![0.0, 0.0, 0.0]).unwrap();
        let samples = vec![(vec![1.0], vec![1.0])];
        let plain = estimate_fisher(&pol, &samples, &fisher_weights(&[1.0], FisherWeighting::Plain)).unwrap();
        assert_eq!(plain[0], 1.0);
        let cf = estimate_fisher(&pol, &samples, &fisher_weights(&[1.0], FisherWeighting::CostWeighted)).unwrap();
        assert_eq!(cf[0], 0.5);
        assert!(matches!(estimate_fisher(&pol, &[], &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn finish_task_appends_one_entry() {
        let mut rng = RunSeed(3).stream(Purpose::Init);
        let pol = GaussianPolicy::new(1, &[4], 1, &mut rng).unwrap();
        let family = RunnerFamily::from_base(&RunnerParams::default());
        let mut env = family.instantiate("nominal").unwrap();
        let mut mem = EwcMemory::new(1.0);
        finish_task(&mut mem, &pol, "nominal", &mut env, 1000, FisherWeighting::Plain, &mut rng).unwrap();
        assert_eq!(mem.len(), 1);
        assert_eq!(mem.entries[0].theta_star, pol.params());
        assert!(mem.entries[0].fisher.iter().all(|f| *f >= 0.0));
    }

    proptest! {
        #[test]
        fn cost_weighting_never_increases_fisher(seed in any::<u64>(), n in 1usize..20) {
            let mut rng = RunSeed(seed).stream(Purpose::Init);
            let pol = GaussianPolicy::new(2, &[4], 1, &mut rng).unwrap();
            let mut samples = Vec::new();
            let mut costs = Vec::new();
            for _ in 0..n {
                let s = vec![rng::normal(&mut rng), rng::normal(&mut rng)];
                let (a, _) = pol.sample(&s, &mut rng).unwrap();
                samples.push((s, a));
                costs.push(if rng::uniform(&mut rng, 0.0, 1.0) < 0.5 { 0.0 } else { rng::uniform(&mut rng, 0.0, 3.0) });
            }
            let plain = estimate_fisher(&pol, &samples, &fisher_weights(&costs, FisherWeighting::Plain)).unwrap();
            let cf = estimate_fisher(&pol, &samples, &fisher_weights(&costs, FisherWeighting::CostWeighted)).unwrap();
            let zero = vec![0.0; n];
            let cf_zero = estimate_fisher(&pol, &samples, &fisher_weights(&zero, FisherWeighting::CostWeighted)).unwrap();
            prop_assert_eq!(&cf_zero, &plain);
            for (p, c) in plain.iter().zip(&cf) {
                prop_assert!(*c >= 0.0);
                prop_assert!(c <= p);
            }
        }
    }
}
