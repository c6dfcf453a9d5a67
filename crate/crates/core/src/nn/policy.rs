//! Diagonal Gaussian policy with a state-independent log standard deviation.

use std::f64::consts::{E, PI};

use crate::error::{check_finite, check_len, Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::mlp::{Activations, MlpShape};
use crate::rng::{self, Rng};

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// `log N(a; mean, exp(log_std)²)` summed over dimensions.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LOG_2PI
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 * (2.0 * PI * E).ln() + ls).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    shape: MlpShape,
    /// Mean-network parameters followed by one log-std per action dimension.
    params: Vec<f64>,
}

/// A forward pass kept for backpropagation.
pub struct PolicyPass {
    acts: Activations,
}

impl PolicyPass {
    pub fn mean(&self) -> &[f64] {
        self.acts.output()
    }
}

impl GaussianPolicy {
    pub const INITIAL_LOG_STD: f64 = -std::f64::consts::LN_2;

    /// Mean network `obs_dim -> hidden.. -> action_dim`, log-std initialised to log 0.5.
    pub fn new(obs_dim: usize, hidden: &[usize], action_dim: usize, rng: &mut Rng) -> Result<Self> {
        let mut widths = vec![obs_dim];
        widths.extend_from_slice(hidden);
        widths.push(action_dim);
        let shape = MlpShape::new(widths)?;
        let mut params = shape.init_params(rng);
        params.extend(std::iter::repeat_n(Self::INITIAL_LOG_STD, action_dim));
        Ok(Self { shape, params })
    }

    pub fn from_params(widths: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let shape = MlpShape::new(widths)?;
        check_len("policy parameters", shape.param_count() + shape.output_dim(), params.len())?;
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn action_dim(&self) -> usize {
        self.shape.output_dim()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn net_len(&self) -> usize {
        self.shape.param_count()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.net_len()..]
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std().iter().map(|l| l.exp()).collect()
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.shape.forward(&self.params[..self.net_len()], state)
    }

    pub fn pass(&self, state: &[f64]) -> Result<PolicyPass> {
        Ok(PolicyPass {
            acts: self.shape.forward_cached(&self.params[..self.net_len()], state)?,
        })
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        check_len("action", self.action_dim(), action.len())?;
        Ok(gaussian_log_prob(&self.mean(state)?, self.log_std(), action))
    }

    pub fn log_prob_from_pass(&self, pass: &PolicyPass, action: &[f64]) -> f64 {
        gaussian_log_prob(pass.mean(), self.log_std(), action)
    }

    /// Entropy of the action distribution (the same in every state).
    pub fn entropy(&self) -> f64 {
        gaussian_entropy(self.log_std())
    }

    /// Draws an action and returns it with its log-probability.
    pub fn sample(&self, state: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(state)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(self.log_std())
            .map(|(m, ls)| m + ls.exp() * rng::normal(rng))
            .collect();
        let lp = gaussian_log_prob(&mean, self.log_std(), &action);
        Ok((action, lp))
    }

    /// `scale * d(log pi(a|s))/d(params)` added into `grad`.
    pub fn accumulate_log_prob_grad(&self, pass: &PolicyPass, action: &[f64], scale: f64, grad: &mut [f64]) {
        let n = self.net_len();
        let mean = pass.mean();
        let mut d_mean = Vec::with_capacity(mean.len());
        for (k, ((m, ls), a)) in mean.iter().zip(self.log_std()).zip(action).enumerate() {
            let inv_var = (-2.0 * ls).exp();
            let diff = a - m;
            d_mean.push(scale * diff * inv_var);
            grad[n + k] += scale * (diff * diff * inv_var - 1.0);
        }
        self.shape
            .backward(&self.params[..n], &pass.acts, &d_mean, &mut grad[..n]);
    }

    /// `log pi(a|s)` and its gradient with respect to every policy parameter.
    pub fn log_prob_and_grad(&self, state: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("action", self.action_dim(), action.len())?;
        check_finite("state", state)?;
        check_finite("action", action)?;
        if self.log_std().iter().any(|l| !l.exp().is_finite() || l.exp() <= 0.0) {
            return Err(Error::numeric("policy standard deviation is not finite and positive"));
        }
        let pass = self.pass(state)?;
        let mut grad = vec![0.0; self.param_count()];
        self.accumulate_log_prob_grad(&pass, action, 1.0, &mut grad);
        Ok((self.log_prob_from_pass(&pass, action), grad))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layer_widths: self.shape.widths().to_vec(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Self::from_params(ckpt.layer_widths.clone(), ckpt.params.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::rng::{Purpose, RunSeed};

    /// mu(s) = theta * s, sigma = 1, theta = 0.
    fn scalar_policy(theta: f64) -> GaussianPolicy {
        GaussianPolicy::from_params(vec![1, 1], vec![theta, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn hand_computed_score() {
        let (lp, g) = scalar_policy(0.0).log_prob_and_grad(&[1.0], &[1.0]).unwrap();
        assert!((lp - (-0.5 - HALF_LOG_2PI)).abs() < 1e-15);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[1], 1.0); // bias path sees the same (a - mu)/sigma^2
        assert_eq!(g[2], 0.0); // (a - mu)^2 / sigma^2 - 1
    }

    #[test]
    fn score_vanishes_at_the_mean() {
        let mut rng = RunSeed(2).stream(Purpose::Init);
        let pol = GaussianPolicy::new(3, &[8, 8], 2, &mut rng).unwrap();
        let s = [0.2, -0.4, 0.9];
        let mean = pol.mean(&s).unwrap();
        let (_, g) = pol.log_prob_and_grad(&s, &mean).unwrap();
        let n = pol.shape().param_count();
        assert!(g[..n].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut rng = RunSeed(4).stream(Purpose::Init);
        for _ in 0..20 {
            let mut pol = GaussianPolicy::new(3, &[6, 5], 2, &mut rng).unwrap();
            for v in pol.params_mut().iter_mut().rev().take(2) {
                *v = rng::uniform(&mut rng, -1.0, 0.5);
            }
            let s: Vec<f64> = (0..3).map(|_| rng::normal(&mut rng)).collect();
            let (a, _) = pol.sample(&s, &mut rng).unwrap();
            let (_, g) = pol.log_prob_and_grad(&s, &a).unwrap();
            let shape = pol.shape().clone();
            let f = |p: &[f64]| {
                let pol = GaussianPolicy::from_params(shape.widths().to_vec(), p.to_vec())?;
                pol.log_prob(&s, &a)
            };
            let report = grad_check(f, pol.params(), &g, 1e-5, 1e-4).unwrap();
            assert!(report.pass, "{report:?}");
        }
    }

    #[test]
    fn entropy_closed_form_and_scaling() {
        let pol = scalar_policy(0.0);
        assert!((pol.entropy() - 1.418_938_533_204_672_7).abs() < 1e-12);
        let mut wide = pol.clone();
        wide.params_mut()[2] = std::f64::consts::LN_2;
        assert!((wide.entropy() - pol.entropy() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn entropy_matches_monte_carlo() {
        let pol = GaussianPolicy::from_params(vec![1, 2], vec![0.0, 0.0, 0.0, 0.0, -0.3, 0.4]).unwrap();
        let mut rng = RunSeed(8).stream(Purpose::Policy);
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let (_, lp) = pol.sample(&[0.5], &mut rng).unwrap();
            sum += -lp;
            sq += lp * lp;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - pol.entropy()).abs() < 3.0 * se, "{mean} vs {}", pol.entropy());
    }

    #[test]
    fn rejects_non_finite_sigma() {
        let pol = GaussianPolicy::from_params(vec![1, 1], vec![0.0, 0.0, 1e6]).unwrap();
        assert!(matches!(pol.log_prob_and_grad(&[1.0], &[0.0]), Err(Error::Numeric(_))));
    }
}
