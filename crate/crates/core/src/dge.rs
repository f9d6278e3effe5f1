//! Data-generating equations: per-sample Jacobians `J_n(X, θ)`, their
//! large-sample limits `J(θ0, θ)`, derivatives and kink locations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GfdError, Result};
use crate::models::{Model, Obs, Sample};
use crate::numdiff;
use crate::quadrature::{self, QuadOptions};
use crate::real::{Real, Taylor};

/// Observation weight `w(x)` for the weighted inverse-cdf equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvCdfWeight {
    /// `w(x) = 1`
    Unit,
    /// `w(x) = 1/x`, positive-support families only
    Recip,
}

impl InvCdfWeight {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InvCdfWeight::Unit => 1.0,
            InvCdfWeight::Recip => 1.0 / x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dge {
    Simple,
    Suffstat,
    Matched,
    InvCdf(InvCdfWeight),
    Jeffreys,
}

impl fmt::Display for Dge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dge::Simple => f.write_str("simple"),
            Dge::Suffstat => f.write_str("suffstat"),
            Dge::Matched => f.write_str("matched"),
            Dge::Jeffreys => f.write_str("jeffreys"),
            Dge::InvCdf(InvCdfWeight::Unit) => f.write_str("invcdf:unit"),
            Dge::InvCdf(InvCdfWeight::Recip) => f.write_str("invcdf:recip"),
        }
    }
}

impl FromStr for Dge {
    type Err = GfdError;

    /// Accepts DGE ids and the table aliases FS, F1 and BJ.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simple" | "FS" => Dge::Simple,
            "suffstat" => Dge::Suffstat,
            "matched" | "F1" => Dge::Matched,
            "jeffreys" | "BJ" => Dge::Jeffreys,
            "invcdf:unit" | "invcdf:1" => Dge::InvCdf(InvCdfWeight::Unit),
            "invcdf:recip" | "invcdf:1/x" => Dge::InvCdf(InvCdfWeight::Recip),
            _ => return Err(GfdError::Input(format!("unknown DGE '{s}'"))),
        })
    }
}

/// `1 + q(x - μ)/(2μ)`, the scaled-normal building block.
fn sn_term<T: Real>(q: f64, x: f64, mu: T) -> T {
    (-mu + x) / mu * (0.5 * q) + 1.0
}

/// Root in μ of `1 + q(x - μ)/(2μ)`, when positive.
fn sn_root(q: f64, x: f64) -> Option<f64> {
    if q == 2.0 {
        return None;
    }
    let r = q * x / (q - 2.0);
    (r > 0.0).then_some(r)
}

impl Dge {
    pub fn supports(&self, model: &Model) -> bool {
        use Model::*;
        match self {
            Dge::Simple => !matches!(model, GammaShape),
            Dge::Suffstat | Dge::Matched => matches!(model, ScaledNormal { .. } | BivnormRho),
            Dge::Jeffreys => model.is_regular(),
            Dge::InvCdf(InvCdfWeight::Unit) => !matches!(model, BivnormRho),
            Dge::InvCdf(InvCdfWeight::Recip) => matches!(model, ScaleExponential | GammaShape),
        }
    }

    fn check(&self, model: &Model) -> Result<()> {
        if self.supports(model) {
            Ok(())
        } else {
            Err(GfdError::Unsupported(format!(
                "DGE '{self}' is not defined for {model}"
            )))
        }
    }

    /// Divisor that makes `J_n / scaling` converge to the limit Jacobian:
    /// `n` for sums over observations, 1 for statistic-level forms.
    pub fn n_scaling(&self, model: &Model, n: usize) -> f64 {
        match (self, model) {
            (Dge::Simple, Model::ScaleExponential) => 1.0,
            (Dge::Simple, _) | (Dge::InvCdf(_), _) => n as f64,
            _ => 1.0,
        }
    }

    /// Ordered breakpoints of `θ ↦ J_n(X, θ)` inside `(lo, hi)`.
    pub fn kink_points(&self, model: &Model, s: &Sample, lo: f64, hi: f64) -> Vec<f64> {
        let mut out: Vec<f64> = match (self, model) {
            (Dge::Simple | Dge::InvCdf(InvCdfWeight::Unit), Model::ScaledNormal { q }) => {
                s.scalars().filter_map(|x| sn_root(*q, x)).collect()
            }
            (Dge::Suffstat | Dge::Matched, Model::ScaledNormal { q }) => {
                sn_root(*q, s.stats().mean).into_iter().collect()
            }
            (Dge::Simple, Model::BivnormRho) => s
                .observations()
                .iter()
                .flat_map(|o| match *o {
                    Obs::Pair(x, y) => {
                        let a = if y != 0.0 { Some(x / y) } else { None };
                        let b = if x != 0.0 { Some(y / x) } else { None };
                        [a, b]
                    }
                    Obs::Scalar(_) => [None, None],
                })
                .flatten()
                .collect(),
            _ => Vec::new(),
        };
        out.retain(|&k| k > lo && k < hi);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Breakpoints of the limit `θ ↦ J(θ0, θ)` inside `(lo, hi)`.
    pub fn limit_kinks(&self, model: &Model, theta0: f64, lo: f64, hi: f64) -> Vec<f64> {
        match (self, model) {
            (Dge::Suffstat | Dge::Matched, Model::ScaledNormal { q }) => sn_root(*q, theta0)
                .into_iter()
                .filter(|&k| k > lo && k < hi)
                .collect(),
            _ => Vec::new(),
        }
    }

    fn check_kink(&self, model: &Model, s: &Sample, theta: f64) -> Result<()> {
        let tol = 1e-10 * theta.abs().max(1.0);
        let ks = self.kink_points(model, s, theta - tol, theta + tol);
        match ks.first() {
            Some(&at) => Err(GfdError::Kink { at }),
            None => Ok(()),
        }
    }

    /// `J_n(X, θ)` for the analytic forms, generic over the scalar type.
    fn jac_generic<T: Real>(&self, model: &Model, s: &Sample, th: T) -> Result<T> {
        let st = s.stats();
        let n = st.n as f64;
        let j = match (self, model) {
            (Dge::Jeffreys, m) => m.fisher(th).sqrt(),
            (Dge::Simple, Model::LocationNormal | Model::UniformLocation) => T::cst(n),
            (Dge::Simple, Model::ScaleExponential) => th.recip(),
            (Dge::Simple | Dge::InvCdf(InvCdfWeight::Unit), Model::ScaledNormal { q }) => s
                .scalars()
                .fold(T::cst(0.0), |acc, x| acc + sn_term(*q, x, th).abs()),
            (Dge::Simple, Model::BivnormRho) => {
                let mut acc = T::cst(0.0);
                for o in s.observations() {
                    if let Obs::Pair(x, y) = *o {
                        acc = acc + (-th * y + x).abs() + (th * x - y).abs();
                    }
                }
                acc / ((-th * th + 1.0) * 2.0)
            }
            (Dge::Suffstat, Model::ScaledNormal { q }) => {
                sn_term(*q, st.mean, th).abs() + th.recip() * (0.5 * q * s.sd_unbiased())
            }
            (Dge::Matched, Model::ScaledNormal { q }) => {
                if !(st.mean > 0.0) {
                    return Err(GfdError::Degenerate(format!(
                        "matched scaled-normal Jacobian needs a positive sample mean, got {}",
                        st.mean
                    )));
                }
                let s2 = s.sd_unbiased().powi(2);
                sn_term(*q, st.mean, th).abs() * (2.0 * st.mean) + th.recip() * (q * q * s2)
            }
            (Dge::Suffstat, Model::BivnormRho) => {
                (th + 1.0).recip() * st.mean_u + (-th + 1.0).recip() * st.mean_v
            }
            (Dge::Matched, Model::BivnormRho) => {
                if !(st.mean_u > 0.0 && st.mean_v > 0.0) {
                    return Err(GfdError::Degenerate(
                        "zero sum or difference statistic".into(),
                    ));
                }
                ((th + 1.0) * st.mean_u).recip() + ((-th + 1.0) * st.mean_v).recip()
            }
            (Dge::InvCdf(w), Model::LocationNormal | Model::UniformLocation) => {
                T::cst(s.scalars().map(|x| w.eval(x).abs()).sum())
            }
            (Dge::InvCdf(w), Model::ScaleExponential) => {
                let sw: f64 = s.scalars().map(|x| (w.eval(x) * x).abs()).sum();
                th.recip() * sw
            }
            _ => {
                return Err(GfdError::Unsupported(format!(
                    "no closed-form Jacobian for '{self}' under {model}"
                )))
            }
        };
        Ok(j)
    }

    fn positive(j: f64) -> Result<f64> {
        if j > 0.0 && j.is_finite() {
            Ok(j)
        } else {
            Err(GfdError::Degenerate(format!("Jacobian evaluates to {j}")))
        }
    }

    /// `J_n(X, θ)` with proportionality constants set to 1.
    pub fn jacobian(&self, model: &Model, s: &Sample, theta: f64) -> Result<f64> {
        self.check(model)?;
        model.check_sample(s)?;
        model.domain().check(theta)?;
        let j = match (self, model) {
            (Dge::InvCdf(w), Model::GammaShape) => {
                let g = GammaRatio::<2>::new(theta)?;
                let mut acc = 0.0;
                for x in s.scalars() {
                    let r = g.at(x)?;
                    acc += (w.eval(x) * r.c[0]).abs();
                }
                acc
            }
            _ => self.jac_generic(model, s, theta)?,
        };
        Self::positive(j)
    }

    /// `J_n` and its first two θ-derivatives.
    pub fn jacobian_derivs(&self, model: &Model, s: &Sample, theta: f64) -> Result<[f64; 3]> {
        self.check(model)?;
        model.check_sample(s)?;
        model.domain().check(theta)?;
        self.check_kink(model, s, theta)?;
        let t: Taylor<3> = match (self, model) {
            (Dge::InvCdf(w), Model::GammaShape) => {
                let g = GammaRatio::<4>::new(theta)?;
                let mut acc = Taylor::<3>::constant(0.0);
                for x in s.scalars() {
                    let r4 = g.at(x)?;
                    let r = Taylor::<3> {
                        c: [r4.c[0], r4.c[1], r4.c[2]],
                    };
                    acc = acc + (r * w.eval(x)).abs();
                }
                acc
            }
            _ => self.jac_generic(model, s, Taylor::var(theta))?,
        };
        Self::positive(t.c[0])?;
        Ok([t.deriv(0), t.deriv(1), t.deriv(2)])
    }

    /// Derivative of order 1 or 2 of `J_n`.
    pub fn jacobian_deriv(
        &self,
        model: &Model,
        s: &Sample,
        theta: f64,
        order: usize,
    ) -> Result<f64> {
        if !(1..=2).contains(&order) {
            return Err(GfdError::Input(format!(
                "Jacobian derivative order {order} not in 1..=2"
            )));
        }
        Ok(self.jacobian_derivs(model, s, theta)?[order])
    }

    /// Same derivatives by kink-aware central differences of `jacobian`.
    pub fn jacobian_deriv_numeric(
        &self,
        model: &Model,
        s: &Sample,
        theta: f64,
        order: usize,
    ) -> Result<f64> {
        self.check_kink(model, s, theta)?;
        let dom = model.domain();
        let kinks = self.kink_points(model, s, dom.lower, dom.upper);
        let f = |t: f64| self.jacobian(model, s, t).unwrap_or(f64::NAN);
        let d = numdiff::derivative(f, theta, order, &kinks);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(GfdError::Numeric(format!(
                "finite difference failed at {theta}"
            )))
        }
    }

    fn limit_generic<T: Real>(&self, model: &Model, theta0: f64, th: T) -> Result<T> {
        let j = match (self, model) {
            (Dge::Jeffreys, m) => m.fisher(th).sqrt(),
            (
                Dge::Simple | Dge::InvCdf(InvCdfWeight::Unit),
                Model::LocationNormal | Model::UniformLocation,
            ) => T::cst(1.0),
            (Dge::Simple | Dge::InvCdf(InvCdfWeight::Recip), Model::ScaleExponential) => th.recip(),
            (Dge::InvCdf(InvCdfWeight::Unit), Model::ScaleExponential) => th.recip() * theta0,
            (Dge::Simple | Dge::InvCdf(InvCdfWeight::Unit), Model::ScaledNormal { q }) => {
                // Folded-normal mean of 1 + q(X - μ)/(2μ), X ~ N(μ0, μ0^q).
                let m = th.recip() * (0.5 * q * theta0) + (1.0 - 0.5 * q);
                let sd = th.recip() * (0.5 * q * theta0.powf(0.5 * q));
                let t = m / sd;
                let phi = (t * t * -0.5).exp() / (2.0 * PI).sqrt();
                sd * phi * 2.0 + m * (t.std_normal_cdf() * 2.0 - 1.0)
            }
            (Dge::Simple, Model::BivnormRho) => {
                let v = th * th - th * (2.0 * theta0) + 1.0;
                v.sqrt() / (-th * th + 1.0) * (2.0 / PI).sqrt()
            }
            (Dge::Suffstat, Model::ScaledNormal { q }) => {
                sn_term(*q, theta0, th).abs() + th.recip() * (0.5 * q * theta0.powf(0.5 * q))
            }
            (Dge::Matched, Model::ScaledNormal { q }) => {
                sn_term(*q, theta0, th).abs() * (2.0 * theta0)
                    + th.recip() * (q * q * theta0.powf(*q))
            }
            (Dge::Suffstat, Model::BivnormRho) => {
                (th + 1.0).recip() * (1.0 + theta0) + (-th + 1.0).recip() * (1.0 - theta0)
            }
            (Dge::Matched, Model::BivnormRho) => {
                ((th + 1.0) * (1.0 + theta0)).recip() + ((-th + 1.0) * (1.0 - theta0)).recip()
            }
            _ => {
                return Err(GfdError::Unsupported(format!(
                    "no closed-form limit Jacobian for '{self}' under {model}"
                )))
            }
        };
        Ok(j)
    }

    /// Limit Jacobian `J(θ0, θ)` and its first two θ-derivatives.
    pub fn limit_jacobian_derivs(
        &self,
        model: &Model,
        theta0: f64,
        theta: f64,
    ) -> Result<[f64; 3]> {
        self.check(model)?;
        let dom = model.domain();
        dom.check(theta0)?;
        dom.check(theta)?;
        let tol = 1e-10 * theta.abs().max(1.0);
        if let Some(&at) = self
            .limit_kinks(model, theta0, theta - tol, theta + tol)
            .first()
        {
            return Err(GfdError::Kink { at });
        }
        let t: Taylor<3> = match (self, model) {
            (Dge::InvCdf(w), Model::GammaShape) => gamma_limit_jacobian(*w, theta0, theta)?,
            _ => self.limit_generic(model, theta0, Taylor::var(theta))?,
        };
        Ok([t.deriv(0), t.deriv(1), t.deriv(2)])
    }

    /// Limit Jacobian (order 0) or one of its first two θ-derivatives.
    pub fn limit_jacobian(
        &self,
        model: &Model,
        theta0: f64,
        theta: f64,
        order: usize,
    ) -> Result<f64> {
        if order > 2 {
            return Err(GfdError::Input(format!(
                "limit derivative order {order} not in 0..=2"
            )));
        }
        Ok(self.limit_jacobian_derivs(model, theta0, theta)?[order])
    }
}

/// `Σ |w(X_i) ∂F(X_i, θ)/∂θ / f(X_i, θ)|` for an arbitrary weight function.
pub fn weighted_invcdf_jacobian<W: Fn(f64) -> f64>(
    model: &Model,
    w: W,
    s: &Sample,
    theta: f64,
) -> Result<f64> {
    model.check_sample(s)?;
    model.domain().check(theta)?;
    let mut acc = 0.0;
    for x in s.scalars() {
        let ratio = match model {
            Model::GammaShape => gamma_score_ratio::<2>(theta, x)?.c[0],
            Model::LocationNormal | Model::UniformLocation => -1.0,
            Model::ScaleExponential => -x / theta,
            Model::ScaledNormal { q } => -sn_term(*q, x, theta),
            Model::BivnormRho => {
                return Err(GfdError::Unsupported(
                    "inverse-cdf equation needs scalar data".into(),
                ))
            }
        };
        if matches!(
            model,
            Model::GammaShape | Model::ScaleExponential | Model::ScaledNormal { .. }
        ) && model.log_density(Obs::Scalar(x), theta) < -690.0
        {
            return Err(GfdError::Underflow(format!(
                "f({x} | {theta}) below 1e-300"
            )));
        }
        acc += (w(x) * ratio).abs();
    }
    Ok(acc)
}

/// Series/continued-fraction pieces of the regularized incomplete gamma
/// function, generic in the shape `a`: returns `(S, L, lower)` with
/// `P(a, x) = S e^L` when `lower`, else `Q(a, x) = S e^L`, where
/// `L = a ln x - x - ln Γ(a)`.
/// `lg` must be `ln Γ(a)`; it depends only on `a` and is shared across `x`.
fn inc_gamma_parts<T: Real>(a: T, lg: T, x: f64) -> Result<(T, T, bool)> {
    const TOL: f64 = 1e-16;
    let lpre = a * x.ln() - x - lg;
    if x < a.value() + 1.0 {
        let mut ap = a;
        let mut del = a.recip();
        let mut sum = del;
        for _ in 0..10_000 {
            ap = ap + 1.0;
            del = del * x / ap;
            sum = sum + del;
            if del.max_abs() <= TOL * sum.max_abs() {
                return Ok((sum, lpre, true));
            }
        }
        Err(GfdError::Numeric(format!(
            "incomplete gamma series failed at a={}, x={x}",
            a.value()
        )))
    } else {
        const TINY: f64 = 1e-300;
        let mut b = -a + (x + 1.0);
        let mut c = T::cst(1.0 / TINY);
        let mut d = b.recip();
        let mut h = d;
        for i in 1..10_000 {
            let fi = i as f64;
            let an = (a - fi) * fi;
            b = b + 2.0;
            d = an * d + b;
            if d.value().abs() < TINY {
                d = d - d.value() + TINY;
            }
            c = b + an / c;
            if c.value().abs() < TINY {
                c = c - c.value() + TINY;
            }
            d = d.recip();
            let del = d * c;
            h = h * del;
            if (del - 1.0).max_abs() <= TOL {
                return Ok((h, lpre, false));
            }
        }
        Err(GfdError::Numeric(format!(
            "incomplete gamma fraction failed at a={}, x={x}",
            a.value()
        )))
    }
}

/// `(∂F(x, θ)/∂θ) / f(x, θ)` for the gamma-shape family as a Taylor series in
/// θ with `N - 1` valid coefficients.
pub fn gamma_score_ratio<const N: usize>(theta: f64, x: f64) -> Result<Taylor<N>> {
    GammaRatio::<N>::new(theta)?.at(x)
}

/// [`gamma_score_ratio`] at a fixed θ for many `x`, sharing `ln Γ(θ)`.
pub struct GammaRatio<const N: usize> {
    theta: f64,
    lg: Vec<f64>,
}

impl<const N: usize> GammaRatio<N> {
    pub fn new(theta: f64) -> Result<Self> {
        // One extra order is consumed by the θ-derivative of F.
        let lg = match N {
            2 => Taylor::<3>::var(theta).lgamma().c.to_vec(),
            4 => Taylor::<5>::var(theta).lgamma().c.to_vec(),
            _ => {
                return Err(GfdError::Unsupported(format!(
                    "gamma ratio with {N} coefficients"
                )))
            }
        };
        Ok(Self { theta, lg })
    }

    pub fn at(&self, x: f64) -> Result<Taylor<N>> {
        let (s, l, lower) = match N {
            2 => {
                let lg = Taylor::<3> {
                    c: [self.lg[0], self.lg[1], self.lg[2]],
                };
                let (s, l, lo) = inc_gamma_parts(Taylor::<3>::var(self.theta), lg, x)?;
                (s.c.to_vec(), l.c.to_vec(), lo)
            }
            _ => {
                let mut c = [0.0; 5];
                c.copy_from_slice(&self.lg);
                let (s, l, lo) = inc_gamma_parts(Taylor::<5>::var(self.theta), Taylor { c }, x)?;
                (s.c.to_vec(), l.c.to_vec(), lo)
            }
        };
        Ok(combine_ratio::<N>(&s, &l, lower, x))
    }
}

fn combine_ratio<const N: usize>(s: &[f64], l: &[f64], lower: bool, x: f64) -> Taylor<N> {
    // With F = ±S e^L and f = e^L / x: (∂F/∂θ)/f = ±x (S' + S L').
    let m = s.len();
    let deriv = |v: &[f64]| -> Vec<f64> { (0..m - 1).map(|k| (k + 1) as f64 * v[k + 1]).collect() };
    let (ds, dl) = (deriv(s), deriv(l));
    let sign = if lower { x } else { -x };
    let mut out = Taylor::<N>::constant(0.0);
    for k in 0..N {
        let mut v = ds[k];
        for j in 0..=k {
            v += s[j] * dl[k - j];
        }
        out.c[k] = sign * v;
    }
    out
}

/// `E_{θ0} |w(X) ∂F/∂θ / f|` for gamma-shape by quadrature in `log x`.
fn gamma_limit_jacobian(w: InvCdfWeight, theta0: f64, theta: f64) -> Result<Taylor<3>> {
    let model = Model::GammaShape;
    let lo_x = (1e-17 * statrs::function::gamma::gamma(theta0 + 1.0)).powf(1.0 / theta0) * 0.1;
    let hi_x = theta0 + 40.0 * theta0.sqrt() + 40.0;
    let (s_lo, s_hi) = (lo_x.max(1e-300).ln(), hi_x.ln());
    let g = GammaRatio::<4>::new(theta)?;
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let integrand = |s: f64| -> f64 {
            let x = s.exp();
            let dens = (model.log_density(Obs::Scalar(x), theta0) + s).exp();
            match g.at(x) {
                Ok(r) => {
                    let r = Taylor::<3> {
                        c: [r.c[0], r.c[1], r.c[2]],
                    };
                    dens * (r * w.eval(x)).abs().c[k]
                }
                Err(_) => f64::NAN,
            }
        };
        let mid = theta0.ln();
        let r = quadrature::integrate(
            integrand,
            &[s_lo, mid.clamp(s_lo, s_hi), s_hi],
            QuadOptions {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                max_panels: 2000,
            },
        )?;
        *o = r.value;
    }
    Ok(Taylor { c: out })
}
