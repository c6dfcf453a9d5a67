//! PPO loss terms with analytic gradients.

use crate::error::{check_len, Error, Result};
use crate::nn::GaussianPolicy;
use crate::ppo::update::TrainBatch;

/// Per-batch standardisation to mean 0, standard deviation 1 (floored at 1e-8).
pub fn normalize(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    values.iter().map(|v| (v - mean) / std).collect()
}

#[derive(Debug, Clone)]
pub struct SurrogateOutput {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Share of samples whose ratio lies outside `[1 - clip, 1 + clip]`.
    pub clip_fraction: f64,
}

/// `-mean_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t)` over the samples in
/// `idx`, where `rho_t = exp(log pi(a_t|s_t) - old_log_prob_t)`.
pub fn clipped_policy_loss(
    policy: &GaussianPolicy,
    batch: &TrainBatch,
    advantages: &[f64],
    idx: &[usize],
    clip: f64,
) -> Result<SurrogateOutput> {
    weighted_surrogates(policy, batch, &[(advantages, 1.0)], idx, clip)
}

/// `sum_k w_k L_k` for clipped surrogate losses `L_k` on several advantage
/// vectors, sharing one forward and one backward pass per sample.
pub fn weighted_surrogates(
    policy: &GaussianPolicy,
    batch: &TrainBatch,
    terms: &[(&[f64], f64)],
    idx: &[usize],
    clip: f64,
) -> Result<SurrogateOutput> {
    for (adv, _) in terms {
        check_len("advantages", batch.len(), adv.len())?;
    }
    if idx.is_empty() {
        return Err(Error::contract("surrogate over an empty minibatch"));
    }
    let n = idx.len() as f64;
    let mut grad = vec![0.0; policy.param_count()];
    let mut loss = 0.0;
    let mut clipped = 0usize;
    for &i in idx {
        let pass = policy.pass(&batch.states[i])?;
        let lp = policy.log_prob_from_pass(&pass, &batch.actions[i]);
        let ratio = (lp - batch.old_log_probs[i]).exp();
        if !ratio.is_finite() {
            return Err(Error::numeric(format!("importance ratio diverged at sample {i}")));
        }
        if (ratio - 1.0).abs() > clip {
            clipped += 1;
        }
        let mut scale = 0.0;
        for &(advantages, w) in terms {
            let adv = advantages[i];
            let unclipped = ratio * adv;
            let bounded = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
            // Gradient flows only through the unclipped branch.
            if unclipped <= bounded {
                loss -= w * unclipped / n;
                scale -= w * adv * ratio / n;
            } else {
                loss -= w * bounded / n;
            }
        }
        if scale != 0.0 {
            policy.accumulate_log_prob_grad(&pass, &batch.actions[i], scale, &mut grad);
        }
    }
    Ok(SurrogateOutput {
        loss,
        grad,
        clip_fraction: clipped as f64 / n,
    })
}

/// Mean squared error and its gradient with respect to the predictions.
pub fn value_loss(predictions: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len("value targets", predictions.len(), targets.len())?;
    if predictions.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d / n;
            2.0 * d / n
        })
        .collect();
    Ok((loss, grad))
}

/// Negative mean policy entropy and its gradient. The policy's spread does
/// not depend on the state, so only the log-std coordinates move.
pub fn entropy_term(policy: &GaussianPolicy) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; policy.param_count()];
    let k = policy.action_dim();
    let n = grad.len();
    for g in &mut grad[n - k..] {
        *g = -1.0;
    }
    (-policy.entropy(), grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::rng::{self, Purpose, RunSeed};

    fn one_sample_batch(old_log_prob: f64) -> (GaussianPolicy, TrainBatch) {
        // mu = 0, sigma = 1, a = 0: log pi = -0.5 ln(2 pi)
        let pol = GaussianPolicy::from_params(vec![1, 1], vec![0.0, 0.0, 0.0]).unwrap();
        let batch = TrainBatch {
            states: vec![vec![1.0]],
            actions: vec![vec![0.0]],
            old_log_probs: vec![old_log_prob],
            ..TrainBatch::zeros(1)
        };
        (pol, batch)
    }

    const LOG_PI_AT_MEAN: f64 = -0.918_938_533_204_672_7;

    #[test]
    fn identity_ratio_gives_negative_mean_advantage() {
        let (pol, batch) = one_sample_batch(LOG_PI_AT_MEAN);
        let out = clipped_policy_loss(&pol, &batch, &[0.7], &[0], 0.2).unwrap();
        assert!((out.loss + 0.7).abs() < 1e-12);
        assert_eq!(out.clip_fraction, 0.0);
    }

    #[test]
    fn ratio_two_positive_advantage_is_clipped() {
        let (pol, batch) = one_sample_batch(LOG_PI_AT_MEAN - std::f64::consts::LN_2);
        let out = clipped_policy_loss(&pol, &batch, &[1.0], &[0], 0.2).unwrap();
        assert!((out.loss + 1.2).abs() < 1e-12);
        assert!(out.grad.iter().all(|&g| g == 0.0));
        assert_eq!(out.clip_fraction, 1.0);
    }

    #[test]
    fn ratio_half_negative_advantage_is_clipped() {
        // min(0.5 * -1, 0.8 * -1) = -0.8, so the loss contribution is +0.8.
        let (pol, batch) = one_sample_batch(LOG_PI_AT_MEAN + std::f64::consts::LN_2);
        let out = clipped_policy_loss(&pol, &batch, &[-1.0], &[0], 0.2).unwrap();
        assert!((out.loss - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_advantages_give_zero_gradient() {
        let mut rng = RunSeed(1).stream(Purpose::Init);
        let pol = GaussianPolicy::new(2, &[4], 1, &mut rng).unwrap();
        let mut batch = TrainBatch::zeros(3);
        for i in 0..3 {
            batch.states[i] = vec![rng::normal(&mut rng), rng::normal(&mut rng)];
            let (a, lp) = pol.sample(&batch.states[i], &mut rng).unwrap();
            batch.actions[i] = a;
            batch.old_log_probs[i] = lp;
        }
        let out = clipped_policy_loss(&pol, &batch, &[0.0; 3], &[0, 1, 2], 0.2).unwrap();
        assert!(out.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn divergent_ratio_is_a_numeric_error() {
        let (pol, batch) = one_sample_batch(-1e6);
        assert!(matches!(
            clipped_policy_loss(&pol, &batch, &[1.0], &[0], 0.2),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn value_loss_examples() {
        assert_eq!(value_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.0);
        let (l, g) = value_loss(&[0.0], &[2.0]).unwrap();
        assert_eq!(l, 4.0);
        assert_eq!(g, vec![-4.0]);
        let preds = [0.3, -1.0, 2.2];
        let targets = [1.0, 0.5, -0.7];
        let (_, g) = value_loss(&preds, &targets).unwrap();
        let r = grad_check(|p| Ok(value_loss(p, &targets)?.0), &preds, &g, 1e-5, 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn entropy_examples() {
        let pol = GaussianPolicy::from_params(vec![1, 1], vec![0.0, 0.0, 0.0]).unwrap();
        let (v, g) = entropy_term(&pol);
        assert!((v + 1.418_94).abs() < 1e-5);
        let r = grad_check(
            |p| Ok(entropy_term(&GaussianPolicy::from_params(vec![1, 1], p.to_vec())?).0),
            pol.params(),
            &g,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn normalisation() {
        let z = normalize(&[1.0, 2.0, 3.0, 4.0]);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
        assert!((z.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
        assert_eq!(normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
