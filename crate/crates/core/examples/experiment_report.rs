//! A small end-to-end experiment: two algorithms on the chain, two seeds
//! each, written to disk and aggregated from the CSVs alone.

use lifeline::harness::{report, run, Algorithm, EnvKind, ExperimentConfig};

fn main() -> lifeline::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lifeline-example"));
    for alg in [Algorithm::Ppo, Algorithm::SafeEwc] {
        let mut cfg = ExperimentConfig::defaults(alg, EnvKind::Chain);
        cfg.seeds = vec![0, 1];
        cfg.steps_per_task = 2_000;
        cfg.out_dir = root.join(alg.id());
        let out = run(&cfg)?;
        println!("{} -> {}", alg.id(), out.dir.display());
    }
    let (_, table) = report(&root)?;
    print!("{table}");
    println!("curves and report.csv under {}", root.display());
    Ok(())
}
