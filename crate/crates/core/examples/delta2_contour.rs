//! Coarse text rendering of the second-order coefficient for the matched
//! scaled-normal equation over (mu, q); `+`, `-` and `0` give its sign.

use gfd::matching::{delta2_contour, scaled_normal_delta2_closed};

fn main() {
    let mu: Vec<f64> = (0..40).map(|i| 0.03 + 2.97 * i as f64 / 39.0).collect();
    let q: Vec<f64> = (0..20).map(|j| 3.0 - 0.15 * j as f64).collect();
    let grid = delta2_contour(&mu, &q);
    println!("  q");
    for (j, row) in grid.chunks(mu.len()).enumerate() {
        let line: String = row
            .iter()
            .map(|p| match p.delta2 {
                d if d > 1e-3 => '+',
                d if d < -1e-3 => '-',
                _ => '0',
            })
            .collect();
        println!("{:>5.2} {line}", q[j]);
    }
    println!("      mu from {:.2} to {:.2}", mu[0], mu[mu.len() - 1]);
    for (m, qq) in [(1.0, 1.0), (1.0, 2.0), (2.5, 2.5), (0.5, 3.0)] {
        println!(
            "delta2(mu={m}, q={qq}) = {:+.6e}",
            scaled_normal_delta2_closed(m, qq)
        );
    }
}
