use std::fmt::Write as _;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::nn::GaussianPolicy;
use crate::ppo::update::{ActorPenalty, TrainBatch};

const HEADER: &str = "lifeline-ewc v1";

/// Anchor parameters and diagonal Fisher saved at the end of one task visit.
#[derive(Debug, Clone, PartialEq)]
pub struct EwcEntry {
    pub task_id: String,
    pub theta_star: Vec<f64>,
    pub fisher: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EwcMemory {
    pub lambda: f64,
    pub entries: Vec<EwcEntry>,
}

impl EwcMemory {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: EwcEntry) -> Result<()> {
        check_len("fisher", entry.theta_star.len(), entry.fisher.len())?;
        if let Some(first) = self.entries.first() {
            check_len("ewc anchor", first.theta_star.len(), entry.theta_star.len())?;
        }
        if entry.fisher.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::numeric("fisher entries must be finite and non-negative"));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\nlambda: {:.16e}\nentries: {}\n", self.lambda, self.entries.len());
        for e in &self.entries {
            let _ = writeln!(s, "entry: {} {}", e.task_id, e.theta_star.len());
            for (t, f) in e.theta_star.iter().zip(&e.fisher) {
                let _ = writeln!(s, "{t:.16e} {f:.16e}");
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::Parse(format!("ewc memory: {m}"));
        if lines.next() != Some(HEADER) {
            return Err(bad("missing header"));
        }
        fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<String> {
            let bad = |m: &str| Error::Parse(format!("ewc memory: {m}"));
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(':'))
                .map(|r| r.trim().to_string())
                .ok_or_else(|| bad(&format!("expected `{key}`")))
        }
        let lambda: f64 = field(&mut lines, "lambda")?.parse().map_err(|_| bad("lambda"))?;
        let count: usize = field(&mut lines, "entries")?.parse().map_err(|_| bad("entry count"))?;
        let mut memory = EwcMemory::new(lambda);
        for _ in 0..count {
            let head = field(&mut lines, "entry")?;
            let (task, len) = head.rsplit_once(' ').ok_or_else(|| bad("entry header"))?;
            let len: usize = len.parse().map_err(|_| bad("entry length"))?;
            let mut theta_star = Vec::with_capacity(len);
            let mut fisher = Vec::with_capacity(len);
            for _ in 0..len {
                let line = lines.next().ok_or_else(|| bad("truncated entry"))?;
                let (t, f) = line.split_once(' ').ok_or_else(|| bad("entry row"))?;
                theta_star.push(t.parse().map_err(|_| bad("anchor value"))?);
                fisher.push(f.parse().map_err(|_| bad("fisher value"))?);
            }
            memory.push(EwcEntry {
                task_id: task.to_string(),
                theta_star,
                fisher,
            })?;
        }
        Ok(memory)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// `sum_k sum_i (lambda/2) F_k,i (theta_i - theta*_k,i)^2` and its gradient.
pub fn ewc_penalty(memory: &EwcMemory, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; theta.len()];
    let value = accumulate(memory, theta, &mut grad)?;
    Ok((value, grad))
}

fn accumulate(memory: &EwcMemory, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
    let lam = memory.lambda;
    let mut value = 0.0;
    for e in &memory.entries {
        check_len("ewc anchor", e.theta_star.len(), theta.len())?;
        for ((g, (t, a)), f) in grad.iter_mut().zip(theta.iter().zip(&e.theta_star)).zip(&e.fisher) {
            let d = t - a;
            value += 0.5 * lam * f * d * d;
            *g += lam * f * d;
        }
    }
    Ok(value)
}

impl ActorPenalty for EwcMemory {
    fn apply(&self, policy: &GaussianPolicy, _: &TrainBatch, _: &[usize], grad: &mut [f64]) -> Result<f64> {
        if self.entries.is_empty() || self.lambda == 0.0 {
            return Ok(0.0);
        }
        accumulate(self, policy.params(), grad)
    }
}
