//! One-sided coverage of the families whose fiducial distribution is exact.

use gfd::simharness::{exactness_suite, DEFAULT_ALPHAS};

fn main() -> gfd::Result<()> {
    let reps = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(2000);
    let report = exactness_suite(&[2, 3, 5, 10], &DEFAULT_ALPHAS, reps, 1)?;
    for c in &report.cells {
        let mark = if c.pass { "ok" } else { "OUT" };
        println!(
            "{:<18} {:<13} n={:<3} p={:<5} {:.4} (±{:.4}) {mark}",
            c.model, c.method, c.n, c.alpha, c.value, c.tolerance
        );
    }
    println!(
        "{} cells, all within four standard errors: {}",
        report.cells.len(),
        report.pass
    );
    Ok(())
}
