//! Second-order expansion of the fiducial density and its quantiles around
//! the MLE, in the standardized variable `y = (θ - θ̂) √(n c)`.

use serde::Serialize;

use crate::dge::Dge;
use crate::error::{GfdError, Result};
use crate::models::{Model, Sample};
use crate::quadrature::{self, QuadOptions};
use crate::special::{norm_pdf, norm_ppf};

/// Probabilists' Hermite polynomial `H_k(x)` for `k ≤ 6`.
pub fn hermite(k: usize, x: f64) -> Result<f64> {
    let x2 = x * x;
    Ok(match k {
        0 => 1.0,
        1 => x,
        2 => x2 - 1.0,
        3 => x * (x2 - 3.0),
        4 => (x2 - 6.0) * x2 + 3.0,
        5 => x * ((x2 - 10.0) * x2 + 15.0),
        6 => ((x2 - 15.0) * x2 + 45.0) * x2 - 15.0,
        _ => return Err(GfdError::Unsupported(format!("Hermite order {k} > 6"))),
    })
}

/// `∫_{-∞}^{a} H_k(y) φ(y) dy` by adaptive quadrature.
pub fn hermite_integral_check(k: usize, a: f64) -> Result<f64> {
    if !(1..=6).contains(&k) {
        return Err(GfdError::Input(format!("order {k} not in 1..=6")));
    }
    let lo = a.min(0.0) - 40.0;
    let f = |y: f64| hermite(k, y).unwrap_or(f64::NAN) * norm_pdf(y);
    // Split at the origin so the bulk sits in its own panels.
    let mut pts = vec![lo];
    if a > 0.0 {
        pts.push(0.0);
    }
    pts.push(a);
    let r = quadrature::integrate(
        f,
        &pts,
        QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 1e-15,
            max_panels: 4000,
        },
    )?;
    Ok(r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoeffs {
    pub theta0: f64,
    pub theta_hat: f64,
    pub n: usize,
    /// `-L_n''(θ̂)`
    pub c: f64,
    /// `L_n'''(θ̂)`
    pub l3: f64,
    /// `L_n''''(θ̂)`
    pub l4: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a6: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
    pub g6: f64,
    pub w1: f64,
}

impl ExpansionCoeffs {
    /// Fill the A and G coefficients from the likelihood and Jacobian pieces.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        theta0: f64,
        theta_hat: f64,
        n: usize,
        c: f64,
        l3: f64,
        l4: f64,
        dlog_j: f64,
        d2_j_over_j: f64,
        w1: f64,
    ) -> Self {
        let a1 = dlog_j / c.sqrt();
        let a2 = 0.5 * d2_j_over_j / c;
        let a3 = l3 / (6.0 * c.powf(1.5));
        let a4 = a1 * a3 + l4 / (24.0 * c * c);
        let a6 = 0.5 * a3 * a3;
        Self {
            theta0,
            theta_hat,
            n,
            c,
            l3,
            l4,
            a1,
            a2,
            a3,
            a4,
            a6,
            g1: a1 + 3.0 * a3,
            g2: a2 + 6.0 * a4 + 45.0 * a6,
            g3: a3,
            g4: a4 + 15.0 * a6,
            g6: a6,
            w1,
        }
    }
}

/// Coefficients at the sample's MLE, with the limit Jacobian taken at `theta0`.
pub fn expansion_coefficients(
    model: &Model,
    dge: &Dge,
    s: &Sample,
    theta0: f64,
) -> Result<ExpansionCoeffs> {
    if !model.is_regular() {
        return Err(GfdError::Unsupported(format!(
            "{model} has no regular expansion"
        )));
    }
    let mle = model.mle(s)?;
    let th = mle.theta_hat;
    let lim = dge.limit_jacobian_derivs(model, theta0, th)?;
    let jn = dge.jacobian_derivs(model, s, th)?;
    let n = s.n();
    let w1 = (n as f64).sqrt() * (jn[1] / jn[0] - lim[1] / lim[0]);
    Ok(ExpansionCoeffs::from_parts(
        theta0,
        th,
        n,
        mle.c,
        mle.l3,
        mle.l4,
        lim[1] / lim[0],
        lim[2] / lim[0],
        w1,
    ))
}

/// Expanded density of `y` truncated after the `1/n` term.
pub fn density_expansion(k: &ExpansionCoeffs, y: f64, n: usize) -> f64 {
    let n = n as f64;
    let y2 = y * y;
    let first = k.a1 * y + k.a3 * y * y2;
    let second = k.a2 * (y2 - 1.0)
        + k.a4 * (y2 * y2 - 3.0)
        + k.a6 * (y2 * y2 * y2 - 15.0)
        + k.w1 * y / k.c.sqrt();
    norm_pdf(y) * (1.0 + first / n.sqrt() + second / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileExpansion {
    pub z: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub theta_approx: f64,
}

/// Approximate upper `(1 - alpha)` quantile of the fiducial distribution.
pub fn quantile_expansion(k: &ExpansionCoeffs, alpha: f64, n: usize) -> Result<QuantileExpansion> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GfdError::Input(format!("alpha {alpha} not in (0, 1)")));
    }
    let z = norm_ppf(1.0 - alpha);
    let h = |j| hermite(j, z).expect("order within table");
    let beta1 = k.g1 + k.g3 * h(2);
    let beta2 = 2.0 * z * beta1 * k.g3 - 0.5 * beta1 * beta1 * z
        + k.g2 * h(1)
        + k.g4 * h(3)
        + k.g6 * h(5)
        + k.w1 / k.c.sqrt();
    Ok(QuantileExpansion {
        z,
        beta1,
        beta2,
        theta_approx: quantile_from(k, z, beta1, beta2, n),
    })
}

fn quantile_from(k: &ExpansionCoeffs, z: f64, beta1: f64, beta2: f64, n: usize) -> f64 {
    let nf = n as f64;
    k.theta_hat + (z + beta1 / nf.sqrt() + beta2 / nf) / (nf * k.c).sqrt()
}
