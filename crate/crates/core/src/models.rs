//! One-parameter families: densities, likelihood derivatives, Fisher
//! information, third-moment `m3`, sampling and maximum likelihood.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal, StandardUniform};
use serde::{Deserialize, Serialize};

use crate::error::{GfdError, Result};
use crate::real::{Real, Taylor};
use crate::special;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Model {
    LocationNormal,
    UniformLocation,
    ScaleExponential,
    GammaShape,
    ScaledNormal { q: f64 },
    BivnormRho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Scalar,
    Pair,
}

/// Open interval `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDomain {
    pub lower: f64,
    pub upper: f64,
}

impl ParamDomain {
    pub fn contains(&self, theta: f64) -> bool {
        theta > self.lower && theta < self.upper
    }

    pub fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(GfdError::Domain {
                theta,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obs {
    Scalar(f64),
    Pair(f64, f64),
}

/// Summary statistics precomputed once per sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Biased variance, `Σ(x - x̄)² / n`.
    pub var: f64,
    pub mean_log: f64,
    pub min: f64,
    pub max: f64,
    /// Mean of `(x + y)² / 2` for pairs.
    pub mean_u: f64,
    /// Mean of `(x - y)² / 2` for pairs.
    pub mean_v: f64,
    pub mean_xy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    obs: Vec<Obs>,
    stats: Stats,
}

impl Sample {
    pub fn scalar(xs: Vec<f64>) -> Result<Self> {
        Self::new(xs.into_iter().map(Obs::Scalar).collect())
    }

    pub fn pairs(ps: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(ps.into_iter().map(|(x, y)| Obs::Pair(x, y)).collect())
    }

    pub fn new(obs: Vec<Obs>) -> Result<Self> {
        if obs.is_empty() {
            return Err(GfdError::Input("empty sample".into()));
        }
        let arity = match obs[0] {
            Obs::Scalar(_) => Arity::Scalar,
            Obs::Pair(..) => Arity::Pair,
        };
        let nf = obs.len() as f64;
        let mut st = Stats {
            n: obs.len(),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            ..Stats::default()
        };
        for o in &obs {
            match (*o, arity) {
                (Obs::Scalar(x), Arity::Scalar) => {
                    if !x.is_finite() {
                        return Err(GfdError::Input(format!("non-finite observation {x}")));
                    }
                    st.mean += x;
                    st.mean_log += if x > 0.0 { x.ln() } else { f64::NAN };
                    st.min = st.min.min(x);
                    st.max = st.max.max(x);
                }
                (Obs::Pair(x, y), Arity::Pair) => {
                    if !(x.is_finite() && y.is_finite()) {
                        return Err(GfdError::Input(format!(
                            "non-finite observation ({x}, {y})"
                        )));
                    }
                    st.mean_u += 0.5 * (x + y) * (x + y);
                    st.mean_v += 0.5 * (x - y) * (x - y);
                    st.mean_xy += x * y;
                }
                _ => return Err(GfdError::Input("mixed observation arity".into())),
            }
        }
        st.mean /= nf;
        st.mean_log /= nf;
        st.mean_u /= nf;
        st.mean_v /= nf;
        st.mean_xy /= nf;
        if arity == Arity::Scalar {
            st.var = obs
                .iter()
                .map(|o| match o {
                    Obs::Scalar(x) => (x - st.mean) * (x - st.mean),
                    Obs::Pair(..) => 0.0,
                })
                .sum::<f64>()
                / nf;
        }
        Ok(Self { obs, stats: st })
    }

    pub fn n(&self) -> usize {
        self.stats.n
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn observations(&self) -> &[Obs] {
        &self.obs
    }

    pub fn arity(&self) -> Arity {
        match self.obs[0] {
            Obs::Scalar(_) => Arity::Scalar,
            Obs::Pair(..) => Arity::Pair,
        }
    }

    /// Scalar values; empty for paired samples.
    pub fn values(&self) -> Vec<f64> {
        self.scalars().collect()
    }

    pub fn scalars(&self) -> impl Iterator<Item = f64> + '_ {
        self.obs.iter().filter_map(|o| match o {
            Obs::Scalar(x) => Some(*x),
            Obs::Pair(..) => None,
        })
    }

    /// Unbiased standard deviation (divisor n - 1).
    pub fn sd_unbiased(&self) -> f64 {
        let n = self.stats.n as f64;
        (self.stats.var * n / (n - 1.0)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleResult {
    pub theta_hat: f64,
    /// `-L_n''(θ̂)`, positive at a maximum.
    pub c: f64,
    pub l3: f64,
    pub l4: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Model {
    pub const IDS: [&'static str; 6] = [
        "location-normal",
        "uniform-location",
        "scale-exponential",
        "gamma-shape",
        "scaled-normal",
        "bivnorm-rho",
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Model::LocationNormal => "location-normal",
            Model::UniformLocation => "uniform-location",
            Model::ScaleExponential => "scale-exponential",
            Model::GammaShape => "gamma-shape",
            Model::ScaledNormal { .. } => "scaled-normal",
            Model::BivnormRho => "bivnorm-rho",
        }
    }

    /// Parse a model id; `q` is used only by `scaled-normal`.
    pub fn parse(id: &str, q: Option<f64>) -> Result<Self> {
        let m = match id {
            "location-normal" => Model::LocationNormal,
            "uniform-location" => Model::UniformLocation,
            "scale-exponential" => Model::ScaleExponential,
            "gamma-shape" => Model::GammaShape,
            "scaled-normal" => Model::scaled_normal(q.unwrap_or(1.0))?,
            "bivnorm-rho" => Model::BivnormRho,
            _ => return Err(GfdError::Input(format!("unknown model '{id}'"))),
        };
        Ok(m)
    }

    pub fn scaled_normal(q: f64) -> Result<Self> {
        if q > 0.0 && q.is_finite() {
            Ok(Model::ScaledNormal { q })
        } else {
            Err(GfdError::Input(format!(
                "scaled-normal needs q > 0, got {q}"
            )))
        }
    }

    pub fn q(&self) -> Option<f64> {
        match self {
            Model::ScaledNormal { q } => Some(*q),
            _ => None,
        }
    }

    pub fn arity(&self) -> Arity {
        match self {
            Model::BivnormRho => Arity::Pair,
            _ => Arity::Scalar,
        }
    }

    pub fn domain(&self) -> ParamDomain {
        let (lower, upper) = match self {
            Model::LocationNormal | Model::UniformLocation => (f64::NEG_INFINITY, f64::INFINITY),
            Model::ScaleExponential | Model::GammaShape | Model::ScaledNormal { .. } => {
                (0.0, f64::INFINITY)
            }
            Model::BivnormRho => (-1.0, 1.0),
        };
        ParamDomain { lower, upper }
    }

    /// Regular models admit likelihood expansions; uniform-location does not.
    pub fn is_regular(&self) -> bool {
        !matches!(self, Model::UniformLocation)
    }

    pub fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.arity() != self.arity() {
            return Err(GfdError::Input(format!(
                "sample arity does not match {self}"
            )));
        }
        if matches!(self, Model::ScaleExponential | Model::GammaShape) && !(s.stats.min > 0.0) {
            return Err(GfdError::Input(format!(
                "{self} observations must be positive"
            )));
        }
        Ok(())
    }

    /// Log-density of one observation.
    pub fn log_density<T: Real>(&self, obs: Obs, th: T) -> T {
        match (self, obs) {
            (Model::LocationNormal, Obs::Scalar(x)) => {
                let d = th - x;
                d * d * -0.5 - 0.5 * LN_2PI
            }
            (Model::UniformLocation, Obs::Scalar(x)) => {
                let t = th.value();
                T::cst(if t <= x && x <= t + 1.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                })
            }
            (Model::ScaleExponential, Obs::Scalar(x)) => -th.ln() - th.recip() * x,
            (Model::GammaShape, Obs::Scalar(x)) => (th - 1.0) * x.ln() - x - th.lgamma(),
            (Model::ScaledNormal { q }, Obs::Scalar(x)) => {
                let d = th - x;
                th.ln() * (-0.5 * q) - d * d / th.powf(*q) * 0.5 - 0.5 * LN_2PI
            }
            (Model::BivnormRho, Obs::Pair(x, y)) => {
                let u = 0.5 * (x + y) * (x + y);
                let v = 0.5 * (x - y) * (x - y);
                bivnorm_loglik(th, u, v)
            }
            _ => T::cst(f64::NAN),
        }
    }

    /// `L_n(θ) = (1/n) Σ log f(X_i | θ)` from sufficient statistics.
    pub fn loglik<T: Real>(&self, st: &Stats, th: T) -> T {
        match self {
            Model::LocationNormal => {
                let d = th - st.mean;
                (d * d + st.var) * -0.5 - 0.5 * LN_2PI
            }
            Model::UniformLocation => {
                let t = th.value();
                T::cst(if st.max - 1.0 <= t && t <= st.min {
                    0.0
                } else {
                    f64::NEG_INFINITY
                })
            }
            Model::ScaleExponential => -th.ln() - th.recip() * st.mean,
            Model::GammaShape => (th - 1.0) * st.mean_log - st.mean - th.lgamma(),
            Model::ScaledNormal { q } => {
                let d = th - st.mean;
                th.ln() * (-0.5 * q) - (d * d + st.var) / th.powf(*q) * 0.5 - 0.5 * LN_2PI
            }
            Model::BivnormRho => bivnorm_loglik(th, st.mean_u, st.mean_v),
        }
    }

    pub fn log_likelihood(&self, s: &Sample, theta: f64) -> Result<f64> {
        self.check_sample(s)?;
        self.domain().check(theta)?;
        Ok(self.loglik(&s.stats, theta))
    }

    /// Exact θ-derivative of `L_n` of the given order (1..=4).
    pub fn log_likelihood_deriv(&self, s: &Sample, theta: f64, order: usize) -> Result<f64> {
        if !(1..=4).contains(&order) {
            return Err(GfdError::Input(format!(
                "derivative order {order} not in 1..=4"
            )));
        }
        if !self.is_regular() {
            return Err(GfdError::Unsupported(format!(
                "{self} has no smooth likelihood"
            )));
        }
        self.check_sample(s)?;
        self.domain().check(theta)?;
        let t: Taylor<5> = self.loglik(&s.stats, Taylor::var(theta));
        Ok(t.deriv(order))
    }

    pub fn fisher<T: Real>(&self, th: T) -> T {
        match self {
            Model::LocationNormal => T::cst(1.0),
            Model::UniformLocation => T::cst(f64::NAN),
            Model::ScaleExponential => (th * th).recip(),
            Model::GammaShape => th.polygamma(1),
            Model::ScaledNormal { q } => th.powf(-q) + (th * th).recip() * (0.5 * q * q),
            Model::BivnormRho => {
                let r2 = th * th;
                let w = -r2 + 1.0;
                (r2 + 1.0) / (w * w)
            }
        }
    }

    /// Fisher information (order 0) or its first two θ-derivatives.
    pub fn fisher_info(&self, theta: f64, order: usize) -> Result<f64> {
        if order > 2 {
            return Err(GfdError::Input(format!(
                "fisher order {order} not in 0..=2"
            )));
        }
        if !self.is_regular() {
            return Err(GfdError::Unsupported(format!(
                "{self} has no Fisher information"
            )));
        }
        self.domain().check(theta)?;
        let t: Taylor<3> = self.fisher(Taylor::var(theta));
        Ok(t.deriv(order))
    }

    /// `E_θ[∂³/∂θ³ log f(X|θ)]`, analytic.
    pub fn m3_analytic<T: Real>(&self, th: T) -> T {
        match self {
            Model::LocationNormal => T::cst(0.0),
            Model::UniformLocation => T::cst(f64::NAN),
            Model::ScaleExponential => (th * th * th).recip() * 4.0,
            Model::GammaShape => -th.polygamma(2),
            Model::ScaledNormal { q } => {
                let t3 = (th * th * th).recip();
                t3 * (0.5 * q * (q + 1.0) * (q + 2.0) - q) + th.powf(-q - 1.0) * (3.0 * q)
            }
            Model::BivnormRho => {
                let a = th + 1.0;
                let b = -th + 1.0;
                (a * a * a).recip() * 2.0 - (b * b * b).recip() * 2.0
            }
        }
    }

    pub fn m3(&self, theta: f64) -> Result<f64> {
        if !self.is_regular() {
            return Err(GfdError::Unsupported(format!("{self} has no m3")));
        }
        self.domain().check(theta)?;
        Ok(self.m3_analytic(theta))
    }

    /// `m3` by 128-node Gauss–Hermite quadrature in the standardized variable,
    /// available for the normal-based families.
    pub fn m3_quadrature(&self, theta: f64) -> Result<f64> {
        self.domain().check(theta)?;
        let gh = special::gauss_hermite();
        let d3 = |obs: Obs| -> f64 {
            let t: Taylor<4> = self.log_density(obs, Taylor::var(theta));
            t.deriv(3)
        };
        match self {
            Model::LocationNormal => Ok(gh.expect(|z| d3(Obs::Scalar(theta + z)))),
            Model::ScaledNormal { q } => {
                let sd = theta.powf(0.5 * q);
                Ok(gh.expect(|z| d3(Obs::Scalar(theta + sd * z))))
            }
            Model::BivnormRho => {
                let s = (1.0 - theta * theta).sqrt();
                Ok(gh.expect(|z1| gh.expect(|z2| d3(Obs::Pair(z1, theta * z1 + s * z2)))))
            }
            _ => Err(GfdError::Unsupported(format!(
                "no Gauss–Hermite m3 for {self}"
            ))),
        }
    }

    /// Draw one observation from `f(·|θ)`.
    pub fn draw<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Obs {
        match self {
            Model::LocationNormal => {
                let z: f64 = StandardNormal.sample(rng);
                Obs::Scalar(theta + z)
            }
            Model::UniformLocation => {
                let u: f64 = StandardUniform.sample(rng);
                Obs::Scalar(theta + u)
            }
            Model::ScaleExponential => {
                let e: f64 = Exp1.sample(rng);
                Obs::Scalar(theta * e)
            }
            Model::GammaShape => {
                let g = Gamma::new(theta, 1.0).expect("positive shape");
                Obs::Scalar(g.sample(rng))
            }
            Model::ScaledNormal { q } => {
                let z: f64 = StandardNormal.sample(rng);
                Obs::Scalar(theta + theta.powf(0.5 * q) * z)
            }
            Model::BivnormRho => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                Obs::Pair(z1, theta * z1 + (1.0 - theta * theta).sqrt() * z2)
            }
        }
    }

    pub fn sample_data<R: Rng + ?Sized>(
        &self,
        theta0: f64,
        n: usize,
        rng: &mut R,
    ) -> Result<Sample> {
        self.domain().check(theta0)?;
        if n == 0 {
            return Err(GfdError::Input("n must be at least 1".into()));
        }
        Sample::new((0..n).map(|_| self.draw(theta0, rng)).collect())
    }

    /// Single-observation cdf `F(x, θ)` for scalar families.
    pub fn cdf1(&self, x: f64, theta: f64) -> Result<f64> {
        match self {
            Model::LocationNormal => Ok(special::norm_cdf(x - theta)),
            Model::UniformLocation => Ok((x - theta).clamp(0.0, 1.0)),
            Model::ScaleExponential => Ok(if x > 0.0 { -(-x / theta).exp_m1() } else { 0.0 }),
            Model::GammaShape => Ok(if x > 0.0 {
                statrs::function::gamma::gamma_lr(theta, x)
            } else {
                0.0
            }),
            Model::ScaledNormal { q } => Ok(special::norm_cdf((x - theta) / theta.powf(0.5 * q))),
            Model::BivnormRho => Err(GfdError::Unsupported("bivariate cdf".into())),
        }
    }

    pub fn pdf1(&self, x: f64, theta: f64) -> f64 {
        self.log_density(Obs::Scalar(x), theta).exp()
    }

    pub fn mle(&self, s: &Sample) -> Result<MleResult> {
        self.check_sample(s)?;
        let st = &s.stats;
        let closed = match self {
            Model::LocationNormal => Some(st.mean),
            Model::ScaleExponential => Some(st.mean),
            Model::UniformLocation => {
                return Err(GfdError::Unsupported(
                    "uniform-location has no unique maximum likelihood estimate".into(),
                ))
            }
            _ => None,
        };
        let (theta_hat, converged, iterations) = match closed {
            Some(t) => (t, true, 0),
            None => self.mle_search(st)?,
        };
        self.domain().check(theta_hat).map_err(|_| {
            GfdError::Convergence(format!("maximum at the domain boundary ({theta_hat})"))
        })?;
        let t: Taylor<5> = self.loglik(st, Taylor::var(theta_hat));
        let c = -t.deriv(2);
        if !(c > 0.0 && c.is_finite()) {
            return Err(GfdError::Convergence(format!(
                "non-positive curvature {c} at θ̂ = {theta_hat}"
            )));
        }
        Ok(MleResult {
            theta_hat,
            c,
            l3: t.deriv(3),
            l4: t.deriv(4),
            converged,
            iterations,
        })
    }

    fn mle_search(&self, st: &Stats) -> Result<(f64, bool, usize)> {
        const GRID: usize = 512;
        let dom = self.domain();
        let (mut lo, mut hi, log_spaced) = match self {
            Model::BivnormRho => (-1.0 + 1e-9, 1.0 - 1e-9, false),
            Model::GammaShape => {
                let r = (st.mean * st.mean / st.var.max(1e-300)).clamp(1e-6, 1e6);
                (r * 1e-4, r * 1e4, true)
            }
            Model::ScaledNormal { .. } => {
                let r = (st.mean * st.mean + st.var).sqrt().max(1e-300);
                (r * 1e-4, r * 1e4, true)
            }
            _ => unreachable!("closed-form models"),
        };
        if st.var == 0.0 && matches!(self, Model::GammaShape) {
            return Err(GfdError::Degenerate("all observations equal".into()));
        }
        let f = |t: f64| self.loglik(st, t);
        let mut iterations = 0;
        for _expand in 0..6 {
            let grid: Vec<f64> = (0..GRID)
                .map(|i| {
                    let u = i as f64 / (GRID - 1) as f64;
                    if log_spaced {
                        lo * (hi / lo).powf(u)
                    } else {
                        lo + (hi - lo) * u
                    }
                })
                .collect();
            let (imax, _) = grid.iter().map(|&t| f(t)).enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
            if log_spaced && (imax == 0 || imax == GRID - 1) {
                if imax == 0 {
                    lo *= 1e-4;
                } else {
                    hi *= 1e4;
                }
                continue;
            }
            let a = grid[imax.saturating_sub(1)];
            let b = grid[(imax + 1).min(GRID - 1)];
            let (t, it) = refine_max(self, st, a, b)?;
            iterations += it;
            if !dom.contains(t) {
                break;
            }
            return Ok((t, true, iterations));
        }
        Err(GfdError::Convergence(format!(
            "{self}: no interior maximum in [{lo:e}, {hi:e}] (mean {}, var {})",
            st.mean, st.var
        )))
    }
}

fn bivnorm_loglik<T: Real>(rho: T, u: f64, v: f64) -> T {
    let a = rho + 1.0;
    let b = -rho + 1.0;
    -(a.ln() + b.ln()) * 0.5 - a.recip() * (0.5 * u) - b.recip() * (0.5 * v) - LN_2PI
}

/// Safeguarded Newton on the score inside `[a, b]`; falls back to bisection
/// whenever the Newton step leaves the bracket.
fn refine_max(model: &Model, st: &Stats, a: f64, b: f64) -> Result<(f64, usize)> {
    let score = |t: f64| -> (f64, f64) {
        let d: Taylor<3> = model.loglik(st, Taylor::var(t));
        (d.deriv(1), d.deriv(2))
    };
    let (mut lo, mut hi) = (a, b);
    let (s_lo, _) = score(lo);
    let (s_hi, _) = score(hi);
    if !(s_lo >= 0.0 && s_hi <= 0.0) {
        // Maximum sits at a bracket end (domain edge); report the better end.
        let t = if model.loglik(st, lo) >= model.loglik(st, hi) {
            lo
        } else {
            hi
        };
        return Ok((t, 0));
    }
    let mut t = 0.5 * (lo + hi);
    for it in 1..=200 {
        let (s, h) = score(t);
        if s.abs() < 1e-14 * (1.0 + h.abs()) {
            return Ok((t, it));
        }
        if s > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - s / h;
        let next = if h < 0.0 && newton >= lo && newton <= hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let scale = t.abs().max(1e-3);
        if (next - t).abs() <= 1e-15 * scale || hi - lo <= 4.0 * f64::EPSILON * scale {
            return Ok((next, it));
        }
        t = next;
    }
    Err(GfdError::Convergence(format!(
        "score refinement stalled near {t}"
    )))
}
