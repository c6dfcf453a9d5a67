//! Cross-seed aggregation and learning-curve export from run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{read_csv, seed_dir, write_csv, RunStatus, SummaryRow};
use crate::metrics::{summarize, TaskSummary};
use crate::rng::RunSeed;
use crate::types::EpisodeRecord;

/// Episodes in the trailing window of the exported learning curves.
pub const CURVE_WINDOW: usize = 100;

/// One seed's metrics averaged over tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub seed: u64,
    pub final_reward: f64,
    /// Over tasks that were revisited; `None` when none were.
    pub normalized_forgetting: Option<f64>,
    pub total_cost: f64,
    pub success_rate: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Mean and sample standard deviation (`n - 1`; 0 for a single value).
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some((m, 0.0));
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    Some((m, var.sqrt()))
}

pub fn aggregate_seed(seed: u64, tasks: &[TaskSummary]) -> SeedAggregate {
    let col = |f: &dyn Fn(&TaskSummary) -> Option<f64>| -> Vec<f64> { tasks.iter().filter_map(f).collect() };
    SeedAggregate {
        seed,
        final_reward: mean(&col(&|t| Some(t.final_reward))).unwrap_or(f64::NAN),
        normalized_forgetting: mean(&col(&|t| t.normalized_forgetting.as_ref().map(|n| n.value))),
        total_cost: mean(&col(&|t| Some(t.total_cost))).unwrap_or(f64::NAN),
        success_rate: mean(&col(&|t| t.success_rate)),
    }
}

/// One row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub seeds: usize,
    pub failed_seeds: usize,
    pub final_reward_mean: Option<f64>,
    pub final_reward_std: Option<f64>,
    pub normalized_forgetting_mean: Option<f64>,
    pub normalized_forgetting_std: Option<f64>,
    pub total_cost_mean: Option<f64>,
    pub total_cost_std: Option<f64>,
    pub success_rate_mean: Option<f64>,
    pub success_rate_std: Option<f64>,
}

impl ReportRow {
    pub fn from_seeds(algorithm: &str, aggs: &[SeedAggregate], failed: usize) -> Self {
        let ms = |xs: Vec<f64>| mean_std(&xs);
        let fr = ms(aggs.iter().map(|a| a.final_reward).collect());
        let nf = ms(aggs.iter().filter_map(|a| a.normalized_forgetting).collect());
        let tc = ms(aggs.iter().map(|a| a.total_cost).collect());
        let sr = ms(aggs.iter().filter_map(|a| a.success_rate).collect());
        Self {
            algorithm: algorithm.to_string(),
            seeds: aggs.len(),
            failed_seeds: failed,
            final_reward_mean: fr.map(|p| p.0),
            final_reward_std: fr.map(|p| p.1),
            normalized_forgetting_mean: nf.map(|p| p.0),
            normalized_forgetting_std: nf.map(|p| p.1),
            total_cost_mean: tc.map(|p| p.0),
            total_cost_std: tc.map(|p| p.1),
            success_rate_mean: sr.map(|p| p.0),
            success_rate_std: sr.map(|p| p.1),
        }
    }
}

/// One experiment directory re-read from disk.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    /// Per ok seed: recomputed task summaries.
    pub seeds: BTreeMap<u64, (Vec<EpisodeRecord>, Vec<TaskSummary>)>,
    pub failed: Vec<u64>,
}

impl ExperimentData {
    pub fn load(dir: &Path) -> Result<Self> {
        let config = ExperimentConfig::load(&dir.join("config.toml"))?;
        let rows: Vec<SummaryRow> = read_csv(&dir.join("summary.csv"))?;
        let failed: Vec<u64> = rows
            .iter()
            .filter(|r| r.status == RunStatus::Failed)
            .map(|r| r.seed)
            .collect();
        let mut seeds = BTreeMap::new();
        for &s in &config.seeds {
            if failed.contains(&s) {
                continue;
            }
            let episodes: Vec<EpisodeRecord> = read_csv(&seed_dir(dir, RunSeed(s)).join("episodes.csv"))?;
            let summaries = summarize(&episodes)?;
            seeds.insert(s, (episodes, summaries));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            seeds,
            failed,
        })
    }

    pub fn aggregates(&self) -> Vec<SeedAggregate> {
        self.seeds.iter().map(|(s, (_, t))| aggregate_seed(*s, t)).collect()
    }
}

/// Experiment directories at or directly below `root`.
pub fn find_experiments(root: &Path) -> Result<Vec<PathBuf>> {
    let is_exp = |p: &Path| p.join("config.toml").is_file() && p.join("summary.csv").is_file();
    if is_exp(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut out = Vec::new();
    if root.is_dir() {
        for entry in fs::read_dir(root)? {
            let p = entry?.path();
            if is_exp(&p) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct CurveRow<'a> {
    episode: usize,
    global_step: u64,
    task_id: &'a str,
    reward: f64,
    cost: f64,
}

/// Trailing-window means of episode reward and cost.
pub fn smooth(records: &[EpisodeRecord], window: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(records.len());
    let (mut sr, mut sc) = (0.0, 0.0);
    for (i, e) in records.iter().enumerate() {
        sr += e.total_reward;
        sc += e.total_cost;
        if i >= window {
            sr -= records[i - window].total_reward;
            sc -= records[i - window].total_cost;
        }
        let n = (i + 1).min(window) as f64;
        out.push((sr / n, sc / n));
    }
    out
}

/// Aggregates every experiment under `root`, writes `report.csv` and
/// `curves/<algorithm>_seed<k>.csv` there, and returns the rows and a
/// printable table.
pub fn report(root: &Path) -> Result<(Vec<ReportRow>, String)> {
    let dirs = find_experiments(root)?;
    if dirs.is_empty() {
        return Err(Error::config(format!("no runs found under {}", root.display())));
    }
    let curves = root.join("curves");
    fs::create_dir_all(&curves)?;
    let mut rows = Vec::new();
    for dir in dirs {
        let data = ExperimentData::load(&dir)?;
        let alg = data.config.algorithm.id();
        for (s, (episodes, _)) in &data.seeds {
            let sm = smooth(episodes, CURVE_WINDOW);
            let cr: Vec<CurveRow> = episodes
                .iter()
                .zip(&sm)
                .enumerate()
                .map(|(i, (e, (r, c)))| CurveRow {
                    episode: i,
                    global_step: e.global_step,
                    task_id: &e.task_id,
                    reward: *r,
                    cost: *c,
                })
                .collect();
            write_csv(&curves.join(format!("{alg}_seed{s}.csv")), &cr)?;
        }
        rows.push(ReportRow::from_seeds(alg, &data.aggregates(), data.failed.len()));
    }
    write_csv(&root.join("report.csv"), &rows)?;
    Ok((rows.clone(), render(&rows)))
}

fn cell(m: Option<f64>, s: Option<f64>) -> String {
    match (m, s) {
        (Some(m), Some(s)) => format!("{m:.3} ± {s:.3}"),
        _ => "-".to_string(),
    }
}

pub fn render(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>5} {:>22} {:>22} {:>22} {:>18}",
        "algorithm", "seeds", "final reward", "norm. forgetting", "total cost", "success rate"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>22} {:>22} {:>22} {:>18}",
            r.algorithm,
            r.seeds,
            cell(r.final_reward_mean, r.final_reward_std),
            cell(r.normalized_forgetting_mean, r.normalized_forgetting_std),
            cell(r.total_cost_mean, r.total_cost_std),
            cell(r.success_rate_mean, r.success_rate_std),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[4.0]), Some((4.0, 0.0)));
        assert_eq!(mean_std(&[1.0, 3.0]), Some((2.0, 2.0f64.sqrt())));
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn two_seed_example() {
        let agg = |seed, v: f64| SeedAggregate {
            seed,
            final_reward: v,
            normalized_forgetting: None,
            total_cost: v,
            success_rate: None,
        };
        let row = ReportRow::from_seeds("ppo", &[agg(0, 1.0), agg(1, 3.0)], 0);
        assert_eq!(row.final_reward_mean, Some(2.0));
        assert_eq!(row.final_reward_std, Some(2.0f64.sqrt()));
        assert_eq!(row.normalized_forgetting_mean, None);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = report(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no runs found"));
    }

    #[test]
    fn smoothing_window() {
        let recs: Vec<EpisodeRecord> = (0..5)
            .map(|i| EpisodeRecord {
                global_step: i,
                task_id: "a".into(),
                visit_index: 0,
                total_reward: i as f64,
                total_cost: 0.0,
                length: 1,
                success: None,
            })
            .collect();
        let s: Vec<f64> = smooth(&recs, 2).into_iter().map(|p| p.0).collect();
        assert_eq!(s, vec![0.0, 0.5, 1.5, 2.5, 3.5]);
    }
}
