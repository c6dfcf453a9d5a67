//! Exact tabular solvers for chain specs: policy evaluation on the reward
//! or cost channel, value iteration, and per-state constraint checks.
//!
//! Transitions are taken literally; the simulator ends episodes at the goal,
//! so the two agree when the goal is absorbing with zero reward and cost
//! (as in [`ChainSpec::hazard_chain`]).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::envs::chain::{bin_probabilities, ChainSpec};
use crate::error::{check_len, Error, Result};
use crate::nn::GaussianPolicy;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 1_000_000;
/// Q-values closer than this count as tied and go to the lower action index.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_len("tabular policy", n_states * n_actions, probs.len())?;
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::contract(format!("policy row {s} is not a distribution")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Puts all mass on `actions[s]` in each state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::Range {
                    what: "policy action",
                    index: a,
                    limit: n_actions,
                });
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// The exact action distribution of a Gaussian policy on one-hot chain
    /// observations, after binning.
    pub fn from_gaussian(policy: &GaussianPolicy, spec: &ChainSpec) -> Result<Self> {
        check_len("policy action width", 1, policy.action_dim())?;
        let std = policy.std()[0];
        let mut probs = Vec::with_capacity(spec.n_states * spec.n_actions);
        for s in 0..spec.n_states {
            let mut obs = vec![0.0; spec.n_states];
            obs[s] = 1.0;
            let mean = policy.mean(&obs)?[0];
            let mut row = bin_probabilities(mean, std, spec.n_actions);
            // Renormalise away the last bits of CDF roundoff.
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            probs.extend(row);
        }
        Self::new(spec.n_states, spec.n_actions, probs)
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Most likely action per state, lowest index on ties.
    pub fn argmax_actions(&self) -> Vec<usize> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(s);
                (1..row.len()).fold(0, |best, a| if row[a] > row[best] { a } else { best })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Reward,
    Cost,
}

fn signal(spec: &ChainSpec, sig: Signal, s: usize, a: usize) -> f64 {
    match sig {
        Signal::Reward => spec.reward(s, a),
        Signal::Cost => spec.cost(s, a),
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::contract(format!("discount {gamma} outside [0, 1)")))
    }
}

fn backup(spec: &ChainSpec, v: &[f64], gamma: f64, x: f64, s: usize, a: usize) -> f64 {
    x + gamma * spec.row(s, a).iter().zip(v).map(|(p, vn)| p * vn).sum::<f64>()
}

/// Iterates `V(s) = sum_a pi(a|s) [x(s,a) + gamma sum_s' p(s'|s,a) V(s')]`
/// until the sup-norm change drops below `tol`.
pub fn policy_evaluate(spec: &ChainSpec, pi: &TabularPolicy, sig: Signal, gamma: f64, tol: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    check_len("policy states", spec.n_states, pi.n_states)?;
    check_len("policy actions", spec.n_actions, pi.n_actions)?;
    evaluate_with(spec, gamma, tol, |s, x: &dyn Fn(usize) -> f64| {
        (0..spec.n_actions).map(|a| pi.prob(s, a) * x(a)).sum::<f64>()
    }, sig)
}

fn evaluate_with<F>(spec: &ChainSpec, gamma: f64, tol: f64, combine: F, sig: Signal) -> Result<Vec<f64>>
where
    F: Fn(usize, &dyn Fn(usize) -> f64) -> f64,
{
    let mut v = vec![0.0; spec.n_states];
    for _ in 0..MAX_SWEEPS {
        let next: Vec<f64> = (0..spec.n_states)
            .map(|s| combine(s, &|a| backup(spec, &v, gamma, signal(spec, sig, s, a), s, a)))
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < tol {
            return Ok(v);
        }
    }
    Err(Error::numeric("policy evaluation did not converge"))
}

/// Bellman-optimality iteration on the reward channel; returns `V*` and a
/// greedy deterministic policy.
pub fn value_iterate(spec: &ChainSpec, gamma: f64, tol: f64) -> Result<(Vec<f64>, TabularPolicy)> {
    check_gamma(gamma)?;
    let v = evaluate_with(
        spec,
        gamma,
        tol,
        |_, q: &dyn Fn(usize) -> f64| (0..spec.n_actions).map(q).fold(f64::NEG_INFINITY, f64::max),
        Signal::Reward,
    )?;
    let greedy: Vec<usize> = (0..spec.n_states)
        .map(|s| {
            let q: Vec<f64> = (0..spec.n_actions)
                .map(|a| backup(spec, &v, gamma, spec.reward(s, a), s, a))
                .collect();
            (1..q.len()).fold(0, |best, a| if q[a] > q[best] + TIE_TOL { a } else { best })
        })
        .collect();
    Ok((v, TabularPolicy::deterministic(spec.n_actions, &greedy)?))
}

/// Largest Bellman-optimality residual of `v`.
pub fn bellman_residual(spec: &ChainSpec, v: &[f64], gamma: f64) -> f64 {
    (0..spec.n_states)
        .map(|s| {
            let best = (0..spec.n_actions)
                .map(|a| backup(spec, v, gamma, spec.reward(s, a), s, a))
                .fold(f64::NEG_INFINITY, f64::max);
            (best - v[s]).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateCheck {
    pub state: usize,
    pub value: f64,
    pub reference: f64,
    /// `value - (reference - eps_forget)`; non-negative when retained.
    pub forget_slack: f64,
    pub cost_value: f64,
    /// `d - cost_value`; non-negative when safe.
    pub cost_slack: f64,
}

impl StateCheck {
    pub fn retained(&self) -> bool {
        self.forget_slack >= 0.0
    }

    pub fn safe(&self) -> bool {
        self.cost_slack >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskCheck {
    pub task_id: String,
    pub states: Vec<StateCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub cost_limit: f64,
    pub eps_forget: f64,
    pub tasks: Vec<TaskCheck>,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.tasks
            .iter()
            .all(|t| t.states.iter().all(|s| s.retained() && s.safe()))
    }

    pub fn violations(&self) -> usize {
        self.tasks
            .iter()
            .flat_map(|t| &t.states)
            .map(|s| usize::from(!s.retained()) + usize::from(!s.safe()))
            .sum()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cost limit d = {}, forgetting tolerance = {}", self.cost_limit, self.eps_forget);
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>10} {:>10} {:>8} {:>10} {:>6}",
            "task", "state", "V", "V*", "retain", "V^C", "safe"
        );
        for t in &self.tasks {
            for s in &t.states {
                let _ = writeln!(
                    out,
                    "{:<10} {:>5} {:>10.4} {:>10.4} {:>8} {:>10.4} {:>6}",
                    t.task_id,
                    s.state,
                    s.value,
                    s.reference,
                    if s.retained() { "ok" } else { "FAIL" },
                    s.cost_value,
                    if s.safe() { "ok" } else { "FAIL" },
                );
            }
        }
        let _ = writeln!(
            out,
            "{}",
            if self.feasible() {
                "feasible".to_string()
            } else {
                format!("infeasible: {} violation(s)", self.violations())
            }
        );
        out
    }
}

/// Checks `V_pi >= V*_k - eps_forget` and `V^C_pi <= d` at every state of
/// every task in `tasks`, each under that task's own dynamics. Policies may
/// differ per task (e.g. the same network binned under permuted actions).
pub fn check_constraints(
    tasks: &[(String, ChainSpec, TabularPolicy)],
    cost_limit: f64,
    eps_forget: f64,
    references: &BTreeMap<String, Vec<f64>>,
) -> Result<ConstraintReport> {
    let mut out = Vec::with_capacity(tasks.len());
    for (task, spec, pi) in tasks {
        let reference = references
            .get(task)
            .ok_or_else(|| Error::config(format!("no reference values for task '{task}'")))?;
        check_len("reference values", spec.n_states, reference.len())?;
        let v = policy_evaluate(spec, pi, Signal::Reward, spec.gamma, DEFAULT_TOL)?;
        let vc = policy_evaluate(spec, pi, Signal::Cost, spec.gamma, DEFAULT_TOL)?;
        let states = (0..spec.n_states)
            .map(|s| StateCheck {
                state: s,
                value: v[s],
                reference: reference[s],
                forget_slack: v[s] - (reference[s] - eps_forget),
                cost_value: vc[s],
                cost_slack: cost_limit - vc[s],
            })
            .collect();
        out.push(TaskCheck {
            task_id: task.clone(),
            states,
        });
    }
    Ok(ConstraintReport {
        cost_limit,
        eps_forget,
        tasks: out,
    })
}

/// Reference optimal values per task, for [`check_constraints`].
pub fn references(tasks: &[(String, ChainSpec)]) -> Result<BTreeMap<String, Vec<f64>>> {
    tasks
        .iter()
        .map(|(t, spec)| Ok((t.clone(), value_iterate(spec, spec.gamma, DEFAULT_TOL)?.0)))
        .collect()
}
