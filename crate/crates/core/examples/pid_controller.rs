//! Gradient-ascent vs PID multiplier on the same episodic cost trace.

use lifeline::safety::{ConstraintConfig, ConstraintController, MultiplierMode};

fn main() {
    let cfg = ConstraintConfig {
        cost_limit: 25.0,
        ..ConstraintConfig::default()
    };
    let mut grad = ConstraintController::new(MultiplierMode::Gradient, cfg.clone());
    let mut pid = ConstraintController::new(MultiplierMode::Pid, cfg);
    // A violation burst after a task change, then recovery.
    let trace = [10.0, 12.0, 60.0, 80.0, 70.0, 45.0, 30.0, 24.0, 20.0, 18.0, 22.0, 19.0];
    println!("{:>6} {:>10} {:>10} {:>10}", "J_C", "lambda_lag", "lambda_pid", "integral");
    for j in trace {
        let g = grad.observe(j);
        let p = pid.observe(j);
        println!("{j:>6.1} {g:>10.4} {p:>10.4} {:>10.2}", pid.pid.integral);
    }
}
