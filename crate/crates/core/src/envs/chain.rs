//! A tabular constrained chain with a hazard on the fast route to the goal.
//!
//! The learner's Gaussian policy emits a real action that is binned into one
//! of `n_actions` discrete choices, so every learned policy has an exact
//! tabular counterpart the oracle can evaluate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::env::{Environment, TaskFamily};
use crate::error::{check_finite, check_len, Error, Result};
use crate::rng::{self, Rng};
use crate::schedule::TaskSchedule;
use crate::types::StepOutcome;

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// `p[s][a][s']`, flattened.
    transitions: Vec<f64>,
    /// `r[s][a]`, flattened.
    rewards: Vec<f64>,
    /// `c[s][a]`, flattened, non-negative.
    costs: Vec<f64>,
    pub start: usize,
    pub goal: usize,
    pub gamma: f64,
    /// Episode step cap in the simulator (the oracle ignores it).
    pub max_steps: usize,
}

impl ChainSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        costs: Vec<f64>,
        start: usize,
        goal: usize,
        gamma: f64,
        max_steps: usize,
    ) -> Result<Self> {
        let spec = Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            costs,
            start,
            goal,
            gamma,
            max_steps,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_states, self.n_actions);
        if n == 0 || m == 0 {
            return Err(Error::config("chain needs at least one state and one action"));
        }
        check_len("chain transition table", n * m * n, self.transitions.len())?;
        check_len("chain reward table", n * m, self.rewards.len())?;
        check_len("chain cost table", n * m, self.costs.len())?;
        for (what, idx) in [("start state", self.start), ("goal state", self.goal)] {
            if idx >= n {
                return Err(Error::Range {
                    what,
                    index: idx,
                    limit: n,
                });
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(format!("chain gamma {} outside [0, 1)", self.gamma)));
        }
        if self.max_steps == 0 {
            return Err(Error::config("chain max_steps must be positive"));
        }
        check_finite("chain tables", &self.transitions)?;
        check_finite("chain tables", &self.rewards)?;
        check_finite("chain tables", &self.costs)?;
        for s in 0..n {
            for a in 0..m {
                let row = self.row(s, a);
                if row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                    return Err(Error::config(format!(
                        "transition row ({s}, {a}) is not a probability distribution"
                    )));
                }
                if self.cost(s, a) < 0.0 {
                    return Err(Error::config(format!("negative cost at ({s}, {a})")));
                }
            }
        }
        Ok(())
    }

    /// Five states `0..=4`, start 0, goal 4. Actions are ordered
    /// `left`, `careful`, `right`. `right` advances one cell; `careful`
    /// advances with probability 1/2 and otherwise stays. Entering the goal
    /// pays 1 (in expectation for `careful`). Dashing `right` out of cell 2
    /// into the hazard cell 3 costs 1; `careful` never costs.
    pub fn hazard_chain() -> Self {
        const N: usize = 5;
        const HAZARD_FROM: usize = 2;
        let (goal, careful_p) = (4, 0.5);
        let mut p = vec![0.0; N * 3 * N];
        let mut r = vec![0.0; N * 3];
        let mut c = vec![0.0; N * 3];
        let at = |s: usize, a: usize, t: usize| (s * 3 + a) * N + t;
        for s in 0..N {
            if s == goal {
                for a in 0..3 {
                    p[at(s, a, s)] = 1.0;
                }
                continue;
            }
            p[at(s, 0, s.saturating_sub(1))] = 1.0;
            p[at(s, 1, s + 1)] += careful_p;
            p[at(s, 1, s)] += 1.0 - careful_p;
            p[at(s, 2, s + 1)] = 1.0;
            if s + 1 == goal {
                r[s * 3 + 1] = careful_p;
                r[s * 3 + 2] = 1.0;
            }
        }
        c[HAZARD_FROM * 3 + 2] = 1.0;
        Self::new(N, 3, p, r, c, 0, goal, 0.9, 30).expect("built-in chain is valid")
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        let base = (s * self.n_actions + a) * n;
        &self.transitions[base..base + n]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.costs[s * self.n_actions + a]
    }

    /// The same chain with action `a` behaving like base action `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_len("action permutation", self.n_actions, perm.len())?;
        let mut seen = vec![false; self.n_actions];
        for &b in perm {
            if b >= self.n_actions || std::mem::replace(&mut seen[b], true) {
                return Err(Error::config(format!("{perm:?} is not a permutation")));
            }
        }
        let (n, m) = (self.n_states, self.n_actions);
        let mut out = self.clone();
        for s in 0..n {
            for (a, &b) in perm.iter().enumerate() {
                out.transitions[(s * m + a) * n..(s * m + a + 1) * n].copy_from_slice(self.row(s, b));
                out.rewards[s * m + a] = self.reward(s, b);
                out.costs[s * m + a] = self.cost(s, b);
            }
        }
        Ok(out)
    }

    /// The same chain with every reward replaced by `r - beta * c`.
    pub fn shaped(&self, beta: f64) -> Self {
        let mut out = self.clone();
        for (r, c) in out.rewards.iter_mut().zip(&self.costs) {
            *r = crate::safety::shape_reward(*r, *c, beta);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# lifeline chain spec");
        let _ = writeln!(out, "n_states {}", self.n_states);
        let _ = writeln!(out, "n_actions {}", self.n_actions);
        let _ = writeln!(out, "start {}", self.start);
        let _ = writeln!(out, "goal {}", self.goal);
        let _ = writeln!(out, "gamma {}", self.gamma);
        let _ = writeln!(out, "max_steps {}", self.max_steps);
        let _ = writeln!(out, "# one row per (state, action), state-major: p(s'=0..n-1) reward cost");
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let mut fields: Vec<String> = self.row(s, a).iter().map(|p| p.to_string()).collect();
                fields.push(self.reward(s, a).to_string());
                fields.push(self.cost(s, a).to_string());
                let _ = writeln!(out, "{}", fields.join(" "));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header: BTreeMap<&str, &str> = BTreeMap::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let first = line.split_whitespace().next().unwrap_or("");
            if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                if !rows.is_empty() {
                    return Err(Error::Parse(format!("line {}: header key after table rows", lineno + 1)));
                }
                let mut kv = line.split_whitespace();
                let (Some(k), Some(v), None) = (kv.next(), kv.next(), kv.next()) else {
                    return Err(Error::Parse(format!("line {}: expected 'key value'", lineno + 1)));
                };
                header.insert(k, v);
            } else {
                let row = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                rows.push(row);
            }
        }
        fn get<T: std::str::FromStr>(h: &BTreeMap<&str, &str>, key: &str) -> Result<T> {
            h.get(key)
                .ok_or_else(|| Error::Parse(format!("missing header key '{key}'")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad value for '{key}'")))
        }
        for key in header.keys() {
            if !["n_states", "n_actions", "start", "goal", "gamma", "max_steps"].contains(key) {
                return Err(Error::Parse(format!("unknown header key '{key}'")));
            }
        }
        let n: usize = get(&header, "n_states")?;
        let m: usize = get(&header, "n_actions")?;
        check_len("chain table rows", n * m, rows.len())?;
        let (mut p, mut r, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for row in rows {
            check_len("chain table row", n + 2, row.len())?;
            p.extend_from_slice(&row[..n]);
            r.push(row[n]);
            c.push(row[n + 1]);
        }
        let max_steps = if header.contains_key("max_steps") {
            get(&header, "max_steps")?
        } else {
            100
        };
        Self::new(
            n,
            m,
            p,
            r,
            c,
            get(&header, "start")?,
            get(&header, "goal")?,
            get(&header, "gamma")?,
            max_steps,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Which discrete action a real-valued action selects: `[-1, 1]` is split
/// into `n` equal bins, and values beyond either end fall in the outer bins.
pub fn bin_action(a: f64, n: usize) -> usize {
    (1..n).filter(|&k| a >= bin_edge(k, n)).count()
}

fn bin_edge(k: usize, n: usize) -> f64 {
    -1.0 + 2.0 * k as f64 / n as f64
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability that `N(mean, std²)` lands in each of the `n` bins.
pub fn bin_probabilities(mean: f64, std: f64, n: usize) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    cdf.extend((1..n).map(|k| normal_cdf((bin_edge(k, n) - mean) / std)));
    cdf.push(1.0);
    cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect()
}

/// One tabular transition. Returns `(next_state, reward, cost, terminated)`.
pub fn chain_step(
    spec: &ChainSpec,
    state: usize,
    action: usize,
    rng: &mut Rng,
) -> Result<(usize, f64, f64, bool)> {
    if state >= spec.n_states {
        return Err(Error::Range {
            what: "chain state",
            index: state,
            limit: spec.n_states,
        });
    }
    if action >= spec.n_actions {
        return Err(Error::Range {
            what: "chain action",
            index: action,
            limit: spec.n_actions,
        });
    }
    let row = spec.row(state, action);
    let u = rng::uniform(rng, 0.0, 1.0);
    let mut acc = 0.0;
    let mut next = row.len() - 1;
    for (t, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            next = t;
            break;
        }
    }
    Ok((
        next,
        spec.reward(state, action),
        spec.cost(state, action),
        next == spec.goal,
    ))
}

#[derive(Debug, Clone)]
pub struct ChainEnv {
    spec: ChainSpec,
    state: usize,
    t: usize,
    done: bool,
}

impl ChainEnv {
    pub fn new(spec: ChainSpec) -> Self {
        Self {
            state: spec.start,
            spec,
            t: 0,
            done: true,
        }
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.spec.n_states];
        v[s] = 1.0;
        v
    }

    pub fn step_discrete(&mut self, action: usize, rng: &mut Rng) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::State("chain stepped after episode end without reset".into()));
        }
        let (next, reward, cost, terminated) = chain_step(&self.spec, self.state, action, rng)?;
        self.state = next;
        self.t += 1;
        let truncated = !terminated && self.t >= self.spec.max_steps;
        self.done = terminated || truncated;
        Ok(StepOutcome {
            next_state: self.one_hot(next),
            reward,
            cost,
            terminated,
            truncated,
            success: terminated,
        })
    }
}

impl Environment for ChainEnv {
    fn observation_dim(&self) -> usize {
        self.spec.n_states
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, _rng: &mut Rng) -> Vec<f64> {
        self.state = self.spec.start;
        self.t = 0;
        self.done = false;
        self.one_hot(self.state)
    }

    fn step(&mut self, action: &[f64], rng: &mut Rng) -> Result<StepOutcome> {
        check_len("chain action", 1, action.len())?;
        check_finite("chain action", action)?;
        self.step_discrete(bin_action(action[0], self.spec.n_actions), rng)
    }

    fn has_success(&self) -> bool {
        true
    }
}

/// A base chain whose action meanings are permuted per task.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFamily {
    pub base: ChainSpec,
    pub tasks: BTreeMap<String, Vec<usize>>,
}

impl ChainFamily {
    pub const DEFAULT_SEQUENCE: [&'static str; 6] =
        ["upright", "mirrored", "upright", "shifted", "mirrored", "upright"];

    /// `upright` keeps the base actions, `mirrored` swaps left and right,
    /// `shifted` rotates them.
    pub fn with_default_tasks(base: ChainSpec) -> Self {
        let m = base.n_actions;
        let mut tasks = BTreeMap::new();
        tasks.insert("upright".to_string(), (0..m).collect());
        tasks.insert("mirrored".to_string(), (0..m).rev().collect());
        tasks.insert("shifted".to_string(), (0..m).map(|a| (a + 1) % m).collect());
        Self { base, tasks }
    }

    pub fn task_spec(&self, task: &str) -> Result<ChainSpec> {
        let perm = self
            .tasks
            .get(task)
            .ok_or_else(|| Error::config(format!("chain has no task '{task}'")))?;
        self.base.permuted(perm)
    }

    pub fn default_schedule(steps_per_task: u64) -> Result<TaskSchedule> {
        TaskSchedule::uniform(&Self::DEFAULT_SEQUENCE, steps_per_task)
    }
}

impl Default for ChainFamily {
    fn default() -> Self {
        Self::with_default_tasks(ChainSpec::hazard_chain())
    }
}

impl TaskFamily for ChainFamily {
    type Env = ChainEnv;

    fn instantiate(&self, task: &str) -> Result<ChainEnv> {
        Ok(ChainEnv::new(self.task_spec(task)?))
    }

    fn task_ids(&self) -> Vec<String> {
        self.tasks.keys().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RunSeed};

    const LEFT: usize = 0;
    const RIGHT: usize = 2;

    fn rng() -> Rng {
        RunSeed(11).stream(Purpose::Environment)
    }

    #[test]
    fn right_moves_one_cell() {
        let spec = ChainSpec::hazard_chain();
        let (s, r, c, done) = chain_step(&spec, 0, RIGHT, &mut rng()).unwrap();
        assert_eq!((s, r, c, done), (1, 0.0, 0.0, false));
        let (s, r, _, done) = chain_step(&spec, 3, RIGHT, &mut rng()).unwrap();
        assert_eq!((s, r, done), (4, 1.0, true));
    }

    #[test]
    fn hazard_emits_cost() {
        let spec = ChainSpec::hazard_chain();
        let (s, _, c, _) = chain_step(&spec, 2, RIGHT, &mut rng()).unwrap();
        assert_eq!((s, c), (3, 1.0));
        let (_, _, c, _) = chain_step(&spec, 2, 1, &mut rng()).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn deterministic_row_always_lands_on_its_target() {
        let spec = ChainSpec::hazard_chain();
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(chain_step(&spec, 0, LEFT, &mut r).unwrap().0, 0);
        }
    }

    #[test]
    fn index_errors() {
        let spec = ChainSpec::hazard_chain();
        assert!(matches!(chain_step(&spec, 5, 0, &mut rng()), Err(Error::Range { .. })));
        assert!(matches!(chain_step(&spec, 0, 3, &mut rng()), Err(Error::Range { .. })));
    }

    #[test]
    fn rows_are_distributions() {
        let spec = ChainSpec::hazard_chain();
        for s in 0..spec.n_states {
            for a in 0..spec.n_actions {
                assert!((spec.row(s, a).iter().sum::<f64>() - 1.0).abs() <= ROW_TOL);
            }
        }
        let mut bad = spec.clone();
        bad.transitions[0] = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn monte_carlo_frequencies_match_row() {
        let spec = ChainSpec::hazard_chain();
        let n = 100_000;
        let mut r = rng();
        let mut stay = 0usize;
        for _ in 0..n {
            if chain_step(&spec, 1, 1, &mut r).unwrap().0 == 1 {
                stay += 1;
            }
        }
        let p = spec.row(1, 1)[1];
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((stay as f64 / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn binning() {
        assert_eq!(bin_action(-0.9, 3), 0);
        assert_eq!(bin_action(0.0, 3), 1);
        assert_eq!(bin_action(0.5, 3), 2);
        assert_eq!(bin_action(7.0, 3), 2);
        assert_eq!(bin_action(-7.0, 3), 0);
        let p = bin_probabilities(0.0, 0.5, 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - p[2]).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let spec = ChainSpec::hazard_chain();
        assert_eq!(ChainSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(ChainSpec::parse("n_states 1\nn_actions 1\nstart 0\ngoal 0\ngamma 0.5\n1 0 0 0\n").is_err());
        assert!(ChainSpec::parse("n_states 1\nwidth 1\n").is_err());
    }

    #[test]
    fn permutations_relabel_actions() {
        let fam = ChainFamily::default();
        let mirrored = fam.task_spec("mirrored").unwrap();
        assert_eq!(mirrored.row(0, LEFT), fam.base.row(0, RIGHT));
        assert_eq!(mirrored.cost(2, LEFT), 1.0);
        assert!(fam.task_spec("sideways").is_err());
        assert!(fam.base.permuted(&[0, 0, 1]).is_err());
    }

    #[test]
    fn env_success_flag() {
        let mut env = ChainEnv::new(ChainSpec::hazard_chain());
        let mut r = rng();
        env.reset(&mut r);
        let mut last = None;
        for _ in 0..4 {
            last = Some(env.step(&[0.9], &mut r).unwrap());
        }
        let last = last.unwrap();
        assert!(last.terminated && last.success);
        assert!(env.step(&[0.9], &mut r).is_err());
    }
}
