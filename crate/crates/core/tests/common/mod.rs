#![allow(dead_code)]

use gfd::{Dge, Model, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sample(model: &Model, theta0: f64, n: usize, seed: u64) -> Sample {
    model.sample_data(theta0, n, &mut rng(seed)).unwrap()
}

/// Regular families with a typical true parameter.
pub fn regular_models() -> Vec<(Model, f64)> {
    vec![
        (Model::LocationNormal, 0.3),
        (Model::ScaleExponential, 1.5),
        (Model::GammaShape, 2.0),
        (Model::ScaledNormal { q: 0.5 }, 1.2),
        (Model::ScaledNormal { q: 1.0 }, 3.0),
        (Model::ScaledNormal { q: 3.0 }, 0.8),
        (Model::BivnormRho, 0.5),
    ]
}

pub const ALL_DGES: [&str; 6] = [
    "simple",
    "suffstat",
    "matched",
    "invcdf:unit",
    "invcdf:recip",
    "jeffreys",
];

/// Every supported (model, DGE, θ0) combination.
pub fn combos() -> Vec<(Model, Dge, f64)> {
    let mut out = Vec::new();
    for (m, t) in regular_models() {
        for id in ALL_DGES {
            let d: Dge = id.parse().unwrap();
            if d.supports(&m) {
                out.push((m, d, t));
            }
        }
    }
    out
}

/// Central difference of order 1 or 2 with a plain step.
pub fn central<F: Fn(f64) -> f64>(f: F, x: f64, order: usize) -> f64 {
    let root = if order == 1 { 1.0 / 3.0 } else { 0.25 };
    let h = f64::EPSILON.powf(root) * x.abs().max(1.0);
    match order {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        _ => unreachable!(),
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
