//! First- and second-order probability-matching coefficients.
//!
//! `Δ1` and `Δ2` are built from the Fisher information `I`, the expected third
//! log-density derivative `m3` and the limit Jacobian `J(θ0, ·)`, all
//! differentiated at `θ0`. Two routes are available: Taylor arithmetic on the
//! closed forms, or central differences of the order-0 values only.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dge::Dge;
use crate::error::{GfdError, Result};
use crate::models::Model;
use crate::numdiff;
use crate::real::{Real, Taylor};
use crate::special::norm_ppf;

/// Default tolerance for calling a coefficient zero.
pub const ORDER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchOrder {
    None,
    First,
    Second,
}

impl MatchOrder {
    pub fn classify(delta1: f64, delta2: f64, tol: f64) -> Self {
        match (delta1.abs() <= tol, delta2.abs() <= tol) {
            (true, true) => MatchOrder::Second,
            (true, false) => MatchOrder::First,
            _ => MatchOrder::None,
        }
    }
}

/// Integrability terms entering the second bracket of `Δ2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ATerms {
    pub a0: f64,
    pub a1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub model: String,
    pub dge: String,
    pub theta0: f64,
    pub alpha: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub a0: f64,
    pub a1: f64,
    pub order: MatchOrder,
}

/// `I`, `m3` and `J(θ0, ·)` as second-order Taylor series at `θ0`.
struct Pieces {
    i: Taylor<3>,
    m3: Taylor<3>,
    j: Taylor<3>,
}

fn pieces(model: &Model, dge: &Dge, theta0: f64) -> Result<Pieces> {
    if !model.is_regular() {
        return Err(GfdError::Unsupported(format!(
            "{model} is outside the regular theory"
        )));
    }
    model.domain().check(theta0)?;
    let t = Taylor::<3>::var(theta0);
    let j = dge.limit_jacobian_derivs(model, theta0, theta0)?;
    Ok(Pieces {
        i: model.fisher(t),
        m3: model.m3_analytic(t),
        j: Taylor {
            c: [j[0], j[1], 0.5 * j[2]],
        },
    })
}

fn kinks(model: &Model, dge: &Dge, theta0: f64) -> Vec<f64> {
    let dom = model.domain();
    dge.limit_kinks(model, theta0, dom.lower, dom.upper)
}

/// `Δ1 = I^{-1/2} ∂ log J + ∂ I^{-1/2}` at `θ0`.
pub fn delta1(model: &Model, dge: &Dge, theta0: f64, route: Route) -> Result<f64> {
    match route {
        Route::Analytic => {
            let p = pieces(model, dge, theta0)?;
            let inv_sqrt = p.i.sqrt().recip();
            Ok(inv_sqrt.c[0] * p.j.deriv(1) / p.j.c[0] + inv_sqrt.deriv(1))
        }
        Route::FiniteDifference => {
            pieces(model, dge, theta0)?;
            let k = kinks(model, dge, theta0);
            let j = |t: f64| dge.limit_jacobian(model, theta0, t, 0).unwrap_or(f64::NAN);
            let inv_sqrt = |t: f64| model.fisher_info(t, 0).map_or(f64::NAN, |i| i.powf(-0.5));
            let dlog_j = numdiff::derivative(|t| j(t).ln(), theta0, 1, &k);
            let d_inv_sqrt = numdiff::derivative(inv_sqrt, theta0, 1, &[]);
            finite(inv_sqrt(theta0) * dlog_j + d_inv_sqrt)
        }
    }
}

/// `Δ2` at `θ0` for the `(1 - alpha)` quantile.
pub fn delta2(
    model: &Model,
    dge: &Dge,
    theta0: f64,
    terms: ATerms,
    alpha: f64,
    route: Route,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GfdError::Domain {
            theta: alpha,
            lower: 0.0,
            upper: 1.0,
        });
    }
    let z = norm_ppf(1.0 - alpha);
    let p = pieces(model, dge, theta0)?;
    let (j0, dlog_j, i0) = (p.j.c[0], p.j.deriv(1) / p.j.c[0], p.i.c[0]);
    let main = match route {
        Route::Analytic => {
            let g1 = p.i.powi(-2) * p.j * p.m3;
            let g2 = p.j / p.i;
            (g1.deriv(1) / 6.0 - 0.5 * g2.deriv(2)) / j0
        }
        Route::FiniteDifference => {
            let k = kinks(model, dge, theta0);
            let j = |t: f64| dge.limit_jacobian(model, theta0, t, 0).unwrap_or(f64::NAN);
            let i = |t: f64| model.fisher_info(t, 0).unwrap_or(f64::NAN);
            let m3 = |t: f64| model.m3(t).unwrap_or(f64::NAN);
            let g1 = numdiff::derivative(|t| j(t) * m3(t) / (i(t) * i(t)), theta0, 1, &k);
            let g2 = numdiff::derivative(|t| j(t) / i(t), theta0, 2, &k);
            finite((g1 / 6.0 - 0.5 * g2) / j0)?
        }
    };
    // The a-bracket is divided by z, which vanishes at alpha = 0.5.
    let bracket = terms.a1 - terms.a0 * dlog_j;
    let extra = if bracket == 0.0 {
        0.0
    } else if z == 0.0 {
        return Err(GfdError::Numeric(
            "non-zero a-terms with z_alpha = 0".into(),
        ));
    } else {
        i0.powf(-0.5) / (z * j0) * bracket
    };
    Ok(main + extra)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GfdError::Numeric(
            "finite-difference evaluation failed".into(),
        ))
    }
}

/// Both coefficients and the resulting matching order.
pub fn match_report(
    model: &Model,
    dge: &Dge,
    theta0: f64,
    terms: ATerms,
    alpha: f64,
    route: Route,
) -> Result<MatchReport> {
    let d1 = delta1(model, dge, theta0, route)?;
    let d2 = delta2(model, dge, theta0, terms, alpha, route)?;
    Ok(MatchReport {
        model: model.id().to_string(),
        dge: dge.to_string(),
        theta0,
        alpha,
        delta1: d1,
        delta2: d2,
        a0: terms.a0,
        a1: terms.a1,
        order: MatchOrder::classify(d1, d2, ORDER_TOL),
    })
}

/// Closed-form `Δ2` of the matched scaled-normal DGE.
pub fn scaled_normal_delta2_closed(mu0: f64, q: f64) -> f64 {
    let mq = mu0.powf(q);
    let m2 = mu0 * mu0;
    let den = 2.0 * m2 + mq * q * q;
    q * (q - 2.0) * mu0.powf(q + 2.0) * (2.0 * m2 + mq * q * (q - 1.0)) / (den * den * den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPoint {
    pub mu: f64,
    pub q: f64,
    pub delta2: f64,
}

/// Closed-form `Δ2` on the grid, one row per `q` value, `mu` varying fastest.
pub fn delta2_contour(mu_grid: &[f64], q_grid: &[f64]) -> Vec<ContourPoint> {
    q_grid
        .par_iter()
        .map(|&q| {
            mu_grid
                .iter()
                .map(|&mu| ContourPoint {
                    mu,
                    q,
                    delta2: scaled_normal_delta2_closed(mu, q),
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

pub fn write_contour_csv<W: Write>(
    mut w: W,
    comments: &[String],
    grid: &[ContourPoint],
) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "mu,q,delta2")?;
    for p in grid {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", p.mu, p.q, p.delta2)?;
    }
    Ok(())
}

/// Families with a known first-order matching class of transformed DGEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassExample {
    /// `A1'(1 + ρ) = A2'(1 - ρ) (1 - ρ)² / (1 + ρ)²`
    Bivnorm,
    /// `A2'(x^{q/2}) = A1'(x) q x^{q/2 - 1}`
    ScaledNormal { q: f64 },
}

/// Left side minus right side of the class identity at `theta`, given the
/// derivatives `d1 = A1'` and `d2 = A2'` of the two transforms.
pub fn first_order_class_residual<F1, F2>(example: ClassExample, d1: F1, d2: F2, theta: f64) -> f64
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    match example {
        ClassExample::Bivnorm => {
            let (p, m) = (1.0 + theta, 1.0 - theta);
            d1(p) - d2(m) * (m * m) / (p * p)
        }
        ClassExample::ScaledNormal { q } => {
            let h = theta.powf(0.5 * q);
            d2(h) - d1(theta) * q * theta.powf(0.5 * q - 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert!((scaled_normal_delta2_closed(1.0, 1.0) + 2.0 / 27.0).abs() < 1e-15);
        assert!((scaled_normal_delta2_closed(2.0, 1.0) + 0.064).abs() < 1e-15);
        assert_eq!(scaled_normal_delta2_closed(0.7, 2.0), 0.0);
    }

    #[test]
    fn bivnorm_suffstat_delta1() {
        let r0: f64 = 0.5;
        let i: f64 = (1.0 + r0 * r0) / (1.0 - r0 * r0).powi(2);
        let oracle = i.powf(-0.5)
            * (r0 / (1.0 - r0 * r0)
                - (3.0 * r0 + r0.powi(3)) / ((1.0 + r0 * r0) * (1.0 - r0 * r0)));
        for route in [Route::Analytic, Route::FiniteDifference] {
            let d = delta1(&Model::BivnormRho, &Dge::Suffstat, r0, route).unwrap();
            assert!((d - oracle).abs() < 1e-7, "{route:?}: {d} vs {oracle}");
        }
        assert!((oracle + 0.71554).abs() < 1e-5);
    }

    #[test]
    fn matched_scaled_normal_agrees_with_closed_form() {
        let m = Model::scaled_normal(1.0).unwrap();
        let d = delta2(
            &m,
            &Dge::Matched,
            1.0,
            ATerms::default(),
            0.05,
            Route::Analytic,
        )
        .unwrap();
        assert!((d + 2.0 / 27.0).abs() < 1e-10);
    }

    #[test]
    fn class_residuals() {
        let recip = |x: f64| -1.0 / (x * x);
        for r in [-0.5, 0.0, 0.7] {
            assert!(
                first_order_class_residual(ClassExample::Bivnorm, recip, recip, r).abs() < 1e-12
            );
        }
        let one = |_: f64| 1.0;
        let v = first_order_class_residual(ClassExample::Bivnorm, one, one, 0.5);
        assert!((v - (1.0 - 0.25 / 2.25)).abs() < 1e-12);
        let q = 1.3;
        let v = first_order_class_residual(
            ClassExample::ScaledNormal { q },
            |x| 2.0 * x,
            |y| 2.0 * q * y,
            2.2,
        );
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn classify() {
        assert_eq!(
            MatchOrder::classify(0.0, 1e-9, ORDER_TOL),
            MatchOrder::Second
        );
        assert_eq!(
            MatchOrder::classify(0.0, 0.07, ORDER_TOL),
            MatchOrder::First
        );
        assert_eq!(MatchOrder::classify(0.1, 0.0, ORDER_TOL), MatchOrder::None);
    }
}
