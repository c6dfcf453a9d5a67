//! Finite-difference checks of every analytic gradient, and the tabular
//! feasibility check of a saved chain policy.

use std::path::Path;

use crate::continual::{EwcEntry, EwcMemory};
use crate::envs::{ChainFamily, ChainSpec};
use crate::error::{Error, Result};
use crate::nn::{grad_check, Checkpoint, GaussianPolicy, GradCheckReport, Mlp};
use crate::oracle::{check_constraints, references, ConstraintReport, TabularPolicy};
use crate::ppo::update::actor_objective;
use crate::ppo::{clipped_policy_loss, entropy_term, normalize, value_loss, ActorPenalty, PpoConfig, TrainBatch};
use crate::rng::{self, Purpose, Rng, RunSeed};
use crate::safety::LagrangianPenalty;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct NamedCheck {
    pub instance: usize,
    pub name: &'static str,
    pub report: GradCheckReport,
}

fn random_widths(rng: &mut Rng, out: usize) -> Vec<usize> {
    let mut w = vec![1 + rng::index(rng, 4)];
    for _ in 0..1 + rng::index(rng, 2) {
        w.push(2 + rng::index(rng, 5));
    }
    w.push(out);
    w
}

fn check<F>(name: &'static str, instance: usize, f: F, params: &[f64], g: &[f64]) -> Result<NamedCheck>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    Ok(NamedCheck {
        instance,
        name,
        report: grad_check(f, params, g, FD_STEP, FD_TOL)?,
    })
}

/// Gradient checks on `instances` random small networks and 4-sample batches.
pub fn gradient_suite(instances: usize, seed: u64) -> Result<Vec<NamedCheck>> {
    let mut rng = RunSeed(seed).stream(Purpose::Init);
    let mut out = Vec::new();
    for k in 0..instances {
        let act_dim = 1 + rng::index(&mut rng, 2);
        let widths = random_widths(&mut rng, act_dim);
        let (obs, act) = (widths[0], *widths.last().expect("widths"));
        let hidden = &widths[1..widths.len() - 1];
        let old = GaussianPolicy::new(obs, hidden, act, &mut rng)?;
        let mut batch = TrainBatch::zeros(4);
        for i in 0..4 {
            batch.states[i] = (0..obs).map(|_| rng::normal(&mut rng)).collect();
            let (a, lp) = old.sample(&batch.states[i], &mut rng)?;
            batch.actions[i] = a;
            batch.old_log_probs[i] = lp;
            batch.advantages[i] = rng::normal(&mut rng);
            batch.returns[i] = rng::normal(&mut rng);
            batch.cost_advantages[i] = rng::normal(&mut rng);
        }
        batch.advantages = normalize(&batch.advantages);
        batch.cost_advantages = normalize(&batch.cost_advantages);
        // A policy a little away from the behaviour policy, ratios well inside the clip range.
        let mut policy = old.clone();
        for p in policy.params_mut() {
            *p += 0.01 * rng::normal(&mut rng);
        }
        let w = policy.shape().widths().to_vec();
        let rebuild = |p: &[f64]| GaussianPolicy::from_params(w.clone(), p.to_vec());
        let theta = policy.params().to_vec();
        let idx = [0, 1, 2, 3];

        let (s0, a0) = (&batch.states[0], &batch.actions[0]);
        let (_, g) = policy.log_prob_and_grad(s0, a0)?;
        out.push(check("log_prob", k, |p| rebuild(p)?.log_prob(s0, a0), &theta, &g)?);

        let g = clipped_policy_loss(&policy, &batch, &batch.advantages, &idx, 0.2)?.grad;
        out.push(check(
            "clipped_surrogate",
            k,
            |p| Ok(clipped_policy_loss(&rebuild(p)?, &batch, &batch.advantages, &idx, 0.2)?.loss),
            &theta,
            &g,
        )?);

        let (_, g) = entropy_term(&policy);
        out.push(check("entropy", k, |p| Ok(entropy_term(&rebuild(p)?).0), &theta, &g)?);

        let mut cw = vec![obs];
        cw.extend_from_slice(hidden);
        cw.push(1);
        let critic = Mlp::new(cw.clone(), &mut rng)?;
        let vl = |net: &Mlp| -> Result<(f64, Vec<f64>)> {
            let mut acts = Vec::new();
            let mut preds = Vec::new();
            for s in &batch.states {
                let a = net.forward_cached(s)?;
                preds.push(a.output()[0]);
                acts.push(a);
            }
            let (l, d) = value_loss(&preds, &batch.returns)?;
            let mut g = vec![0.0; net.params().len()];
            for (a, di) in acts.iter().zip(&d) {
                net.backward(a, &[*di], &mut g);
            }
            Ok((l, g))
        };
        let (_, g) = vl(&critic)?;
        out.push(check(
            "value_loss",
            k,
            |p| Ok(vl(&Mlp::from_params(cw.clone(), p.to_vec())?)?.0),
            critic.params(),
            &g,
        )?);

        let mut memory = EwcMemory::new(0.5 + 20.0 * rng::uniform(&mut rng, 0.0, 1.0));
        for _ in 0..2 {
            memory.push(EwcEntry {
                task_id: "t".into(),
                theta_star: theta.iter().map(|t| t + rng::normal(&mut rng)).collect(),
                fisher: theta.iter().map(|_| rng::uniform(&mut rng, 0.1, 2.0)).collect(),
            })?;
        }
        let (_, g) = crate::continual::ewc_penalty(&memory, &theta)?;
        out.push(check("ewc_penalty", k, |p| Ok(crate::continual::ewc_penalty(&memory, p)?.0), &theta, &g)?);

        let lag = LagrangianPenalty {
            lambda: rng::uniform(&mut rng, 0.1, 5.0),
            clip: 0.2,
        };
        let mut g = vec![0.0; theta.len()];
        lag.apply(&policy, &batch, &idx, &mut g)?;
        out.push(check(
            "lagrangian_penalty",
            k,
            |p| lag.apply(&rebuild(p)?, &batch, &idx, &mut vec![0.0; p.len()]),
            &theta,
            &g,
        )?);

        let cfg = PpoConfig::default();
        let (_, g, _) = actor_objective(&policy, &batch, &idx, &cfg, &memory)?;
        out.push(check(
            "actor_objective",
            k,
            |p| Ok(actor_objective(&rebuild(p)?, &batch, &idx, &cfg, &memory)?.0),
            &theta,
            &g,
        )?);
    }
    Ok(out)
}

/// Evaluates a saved policy on a chain spec (and its permuted tasks) against
/// value-iteration references.
pub fn oracle_check(
    spec_path: &Path,
    ckpt_path: &Path,
    tasks: &[String],
    cost_limit: f64,
    eps_forget: f64,
) -> Result<ConstraintReport> {
    let spec = ChainSpec::load(spec_path)?;
    let policy = GaussianPolicy::from_checkpoint(&Checkpoint::load(ckpt_path)?)?;
    if policy.shape().input_dim() != spec.n_states {
        return Err(Error::config(format!(
            "policy expects {} inputs, chain has {} states",
            policy.shape().input_dim(),
            spec.n_states
        )));
    }
    let family = ChainFamily::with_default_tasks(spec);
    let specs = tasks
        .iter()
        .map(|t| Ok((t.clone(), family.task_spec(t)?)))
        .collect::<Result<Vec<_>>>()?;
    let refs = references(&specs)?;
    let with_pi = specs
        .into_iter()
        .map(|(t, s)| {
            let pi = TabularPolicy::from_gaussian(&policy, &s)?;
            Ok((t, s, pi))
        })
        .collect::<Result<Vec<_>>>()?;
    check_constraints(&with_pi, cost_limit, eps_forget, &refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_a_few_instances() {
        let checks = gradient_suite(3, 1).unwrap();
        assert_eq!(checks.len(), 21);
        for c in checks {
            assert!(c.report.pass, "{} #{}: {:?}", c.name, c.instance, c.report);
        }
    }
}
