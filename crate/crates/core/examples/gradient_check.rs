//! Central-difference checks of every analytic gradient on a few random
//! small networks.

use lifeline::harness::checks::gradient_suite;

fn main() -> lifeline::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    for c in gradient_suite(n, 7)? {
        println!(
            "#{:<2} {:<20} max rel err {:.2e} {}",
            c.instance,
            c.name,
            c.report.max_rel_error,
            if c.report.pass { "ok" } else { "MISMATCH" }
        );
    }
    Ok(())
}
