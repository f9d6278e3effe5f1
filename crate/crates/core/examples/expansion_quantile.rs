//! Compare the second-order expansion quantile with the exact fiducial
//! quantile for the scaled-normal model as the sample size grows.

use gfd::expansion::{density_expansion, expansion_coefficients, quantile_expansion};
use gfd::fiducial::{build_density, DensityOptions};
use gfd::quadrature::{integrate, QuadOptions};
use gfd::simharness::replication_rng;
use gfd::{Dge, Model};

fn main() -> gfd::Result<()> {
    let model = Model::scaled_normal(1.0)?;
    let dge = Dge::Matched;
    let mu0 = 3.0;
    println!(
        "{:>4} {:>4} {:>6} {:>10} {:>10} {:>12} {:>12}",
        "seed", "n", "alpha", "expansion", "exact", "cdf - (1-a)", "normal only"
    );
    for seed in 1..=5u64 {
        for n in [10usize, 100] {
            let s = model.sample_data(mu0, n, &mut replication_rng(seed, mu0, n, 0, 0))?;
            let k = expansion_coefficients(&model, &dge, &s, mu0)?;
            let dens = build_density(model, &dge, &s, DensityOptions::default())?;
            for alpha in [0.05, 0.95] {
                let q = quantile_expansion(&k, alpha, n)?;
                let exact = dens.quantile(1.0 - alpha)?.theta_p;
                let first = k.theta_hat + q.z / (n as f64 * k.c).sqrt();
                println!(
                    "{seed:>4} {n:>4} {alpha:>6} {:>10.6} {exact:>10.6} {:>12.3e} {:>12.3e}",
                    q.theta_approx,
                    dens.cdf(q.theta_approx) - (1.0 - alpha),
                    dens.cdf(first) - (1.0 - alpha),
                );
            }
            if n == 100 {
                let mass = integrate(
                    |y| density_expansion(&k, y, n),
                    &[-8.0, 0.0, 8.0],
                    QuadOptions::default(),
                )?;
                println!(
                    "{seed:>4} {n:>4}  expanded density mass on [-8, 8]: {:.6}",
                    mass.value
                );
            }
        }
    }
    Ok(())
}
