//! Special functions: polygamma, standard normal helpers, probabilists'
//! Hermite polynomials and Gauss–Hermite nodes.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use statrs::function::erf::erfc_inv;

const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Polygamma function ψ^(k)(x) for x > 0.
pub fn polygamma(k: usize, x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let kf = factorial(k);
    let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut x = x;
    let mut acc = 0.0;
    while x < 20.0 {
        acc -= sign_k * kf / x.powi(k as i32 + 1);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    if k == 0 {
        let mut s = x.ln() - 0.5 * inv;
        let mut p = inv2;
        for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
            s -= b / (2.0 * (j + 1) as f64) * p;
            p *= inv2;
        }
        return acc + s;
    }
    let mut s = factorial(k - 1) * inv.powi(k as i32) + 0.5 * kf * inv.powi(k as i32 + 1);
    let mut p = inv.powi(k as i32 + 2);
    // (2j + k - 1)! / (2j)!, updated incrementally
    let mut ratio = factorial(k + 1) / 2.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let m = 2 * (j + 1);
        if j > 0 {
            ratio *= ((m + k - 2) * (m + k - 1)) as f64 / ((m - 1) * m) as f64;
        }
        s += b * ratio * p;
        p *= inv2;
    }
    acc - sign_k * s
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile.
pub fn norm_ppf(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Probabilists' Hermite polynomial He_k(x) via the three-term recurrence.
pub fn hermite_he(k: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = x * h1 - j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Nodes and weights for E[g(Z)], Z ~ N(0,1).
#[derive(Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * g(z))
            .sum()
    }
}

/// 128-node rule, computed once.
pub fn gauss_hermite() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| physicists_rule(128))
}

fn physicists_rule(n: usize) -> GaussHermite {
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt_pi = PI.sqrt();
    GaussHermite {
        nodes: x.iter().map(|v| v * SQRT_2).collect(),
        weights: w.iter().map(|v| v / sqrt_pi).collect(),
    }
}
