use crate::error::{check_len, Result};

/// Generalised advantage estimates for one episode segment.
///
/// `values[t]` is `V(s_t)`; `bootstrap_value` stands in for `V(s_T)` after the
/// last step and must be 0 when the segment ended in a true termination.
pub fn compute_gae(rewards: &[f64], values: &[f64], bootstrap_value: f64, gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    check_len("values", rewards.len(), values.len())?;
    let mut adv = vec![0.0; rewards.len()];
    let mut next_value = bootstrap_value;
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    Ok(adv)
}

/// Discounted returns for one segment, bootstrapped after the last step.
pub fn compute_returns(rewards: &[f64], gamma: f64, bootstrap_value: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = bootstrap_value;
    for t in (0..rewards.len()).rev() {
        running = rewards[t] + gamma * running;
        out[t] = running;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose, RunSeed};
    use proptest::prelude::*;

    #[test]
    fn single_terminal_step() {
        let a = compute_gae(&[1.0], &[0.5], 0.0, 0.9, 0.95).unwrap();
        assert_eq!(a, vec![0.5]);
    }

    #[test]
    fn lambda_one_telescopes() {
        let a = compute_gae(&[1.0, 1.0], &[0.0, 0.0], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![2.0, 1.0]);
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let r = [0.3, -1.0, 2.0];
        let v = [0.1, 0.7, -0.4];
        let (g, boot) = (0.9, 1.3);
        let a = compute_gae(&r, &v, boot, g, 0.0).unwrap();
        let next = [v[1], v[2], boot];
        for t in 0..3 {
            assert_eq!(a[t], r[t] + g * next[t] - v[t]);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_gae(&[1.0, 2.0], &[0.0], 0.0, 0.9, 0.9).is_err());
    }

    #[test]
    fn returns_examples() {
        assert_eq!(compute_returns(&[1.0, 1.0, 1.0], 0.5, 0.0), vec![1.75, 1.5, 1.0]);
        assert_eq!(compute_returns(&[0.2, -3.0], 0.0, 9.0), vec![0.2, -3.0]);
        for horizon in [1, 5, 40] {
            let g = compute_returns(&vec![1.0; horizon], 0.5, 2.0);
            assert_eq!(g[0], 2.0);
        }
    }

    proptest! {
        #[test]
        fn advantage_plus_value_is_return(seed in 0u64..10_000, len in 1usize..60, gamma in 0.0f64..1.0, truncated: bool) {
            let mut r = RunSeed(seed).stream(Purpose::Evaluation);
            let rewards: Vec<f64> = (0..len).map(|_| rng::normal(&mut r)).collect();
            let values: Vec<f64> = (0..len).map(|_| rng::normal(&mut r)).collect();
            let boot = if truncated { rng::normal(&mut r) } else { 0.0 };
            let adv = compute_gae(&rewards, &values, boot, gamma, 1.0).unwrap();
            let ret = compute_returns(&rewards, gamma, boot);
            for t in 0..len {
                prop_assert!((adv[t] + values[t] - ret[t]).abs() < 1e-10);
            }
        }
    }
}
