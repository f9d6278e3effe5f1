//! Normalized weighted-likelihood densities over θ.
//!
//! The unnormalized log-density is `n L_n(θ) + log w(θ)` where `w` is a DGE
//! Jacobian or a prior weight. Integration happens on a bracket around the
//! MLE, split at the weight's kinks, after subtracting the log-height at the
//! MLE.

use serde::Serialize;

use crate::dge::Dge;
use crate::error::{GfdError, Result};
use crate::models::{MleResult, Model, Sample};
use crate::quadrature::{self, gauss10, Panel, QuadOptions};

/// A positive weight on the parameter space multiplying the likelihood.
pub trait Weight: Sync {
    fn log_weight(&self, model: &Model, s: &Sample, theta: f64) -> Result<f64>;

    /// Non-differentiability points inside `(lo, hi)`, ascending.
    fn kinks(&self, model: &Model, s: &Sample, lo: f64, hi: f64) -> Vec<f64>;
}

impl Weight for Dge {
    fn log_weight(&self, model: &Model, s: &Sample, theta: f64) -> Result<f64> {
        Ok(self.jacobian(model, s, theta)?.ln())
    }

    fn kinks(&self, model: &Model, s: &Sample, lo: f64, hi: f64) -> Vec<f64> {
        self.kink_points(model, s, lo, hi)
    }
}

/// A weight multiplied by a positive constant.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<W> {
    pub inner: W,
    pub factor: f64,
}

impl<W: Weight> Weight for Scaled<W> {
    fn log_weight(&self, model: &Model, s: &Sample, theta: f64) -> Result<f64> {
        Ok(self.inner.log_weight(model, s, theta)? + self.factor.ln())
    }

    fn kinks(&self, model: &Model, s: &Sample, lo: f64, hi: f64) -> Vec<f64> {
        self.inner.kinks(model, s, lo, hi)
    }
}

/// The prior weight `θ ↦ √I(θ)`.
pub fn jeffreys_weight(model: &Model) -> Result<Dge> {
    if model.is_regular() {
        Ok(Dge::Jeffreys)
    } else {
        Err(GfdError::Unsupported(format!(
            "{model} has no Fisher information"
        )))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DensityOptions {
    /// Relative tolerance of the normalizing integral.
    pub rel_tol: f64,
    /// Bracket ends sit where the integrand falls below this fraction of its
    /// height at the MLE.
    pub tail_ratio: f64,
    /// Bound on `f(t) |t - θ̂|` at each bracket end, relative to the mass of
    /// the normal approximation; this caps the mass of polynomial tails.
    pub tail_mass: f64,
    /// Distance kept from a finite domain edge.
    pub edge_gap: f64,
    /// Target for `|cdf(quantile(p)) - p|`.
    pub quantile_tol: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            tail_ratio: 1e-12,
            tail_mass: 1e-11,
            edge_gap: 1e-12,
            quantile_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileResult {
    pub p: f64,
    pub theta_p: f64,
    /// `|cdf(theta_p) - p|`
    pub cdf_error: f64,
}

#[derive(Clone)]
pub struct FiducialDensity<'a> {
    model: Model,
    weight: &'a dyn Weight,
    sample: &'a Sample,
    n: f64,
    lo: f64,
    hi: f64,
    breakpoints: Vec<f64>,
    center: f64,
    shift: f64,
    mass: f64,
    panels: Vec<Panel>,
    cum: Vec<f64>,
    mle: Option<MleResult>,
    warnings: Vec<String>,
    opts: DensityOptions,
}

impl std::fmt::Debug for FiducialDensity<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiducialDensity")
            .field("model", &self.model)
            .field("bracket", &(self.lo, self.hi))
            .field("breakpoints", &self.breakpoints.len())
            .field("center", &self.center)
            .field("log_normalizer", &self.log_normalizer())
            .field("warnings", &self.warnings)
            .finish()
    }
}

impl<'a> FiducialDensity<'a> {
    /// Build and normalize the density.
    pub fn build(
        model: Model,
        weight: &'a dyn Weight,
        sample: &'a Sample,
        opts: DensityOptions,
    ) -> Result<Self> {
        model.check_sample(sample)?;
        let n = sample.n() as f64;
        let dom = model.domain();
        let log_f = |t: f64| -> Result<f64> {
            Ok(n * model.loglik(sample.stats(), t) + weight.log_weight(&model, sample, t)?)
        };
        let mut warnings = Vec::new();

        let (lo, hi, center, mle) = if model.is_regular() {
            let mle = model.mle(sample)?;
            let center = mle.theta_hat;
            let peak = log_f(center)?;
            let cut = peak + opts.tail_ratio.ln();
            let sigma = (n * mle.c).sqrt().recip();
            let step = 8.0 * sigma;
            let log_tail_cut = (opts.tail_mass * sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
            let mut ends = [center, center];
            for (side, dir) in [(0usize, -1.0f64), (1, 1.0)] {
                let edge = if dir < 0.0 { dom.lower } else { dom.upper };
                let mut k = 1.0;
                loop {
                    let t = center + dir * step * k;
                    let clipped = edge.is_finite() && (t - edge) * dir >= -opts.edge_gap;
                    if clipped {
                        let e = edge - dir * opts.edge_gap;
                        let v = log_f(e).unwrap_or(f64::NEG_INFINITY);
                        if v > cut {
                            warnings.push(format!(
                                "non-negligible density at domain edge {edge} (log ratio {:.3})",
                                v - peak
                            ));
                        }
                        ends[side] = e;
                        break;
                    }
                    let v = log_f(t)?;
                    if v.is_nan() {
                        return Err(GfdError::Build(format!("log-density is NaN at {t}")));
                    }
                    if v < cut && v - peak + (t - center).abs().ln() < log_tail_cut {
                        ends[side] = t;
                        break;
                    }
                    k *= 2.0;
                    if k > 1e15 {
                        return Err(GfdError::Build("density tail does not decay".into()));
                    }
                }
            }
            (ends[0], ends[1], center, Some(mle))
        } else {
            // Likelihood is flat on [max - 1, min].
            let st = sample.stats();
            let (lo, hi) = (st.max - 1.0, st.min);
            if !(hi > lo) {
                return Err(GfdError::Degenerate("empty likelihood support".into()));
            }
            (lo, hi, 0.5 * (lo + hi), None)
        };

        let shift = log_f(center)?;
        if !shift.is_finite() {
            return Err(GfdError::Build(format!(
                "log-density {shift} at the centre {center}"
            )));
        }
        let mut breakpoints = vec![lo];
        breakpoints.extend(weight.kinks(&model, sample, lo, hi));
        breakpoints.push(center);
        breakpoints.push(hi);
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();

        let integrand = |t: f64| match log_f(t) {
            Ok(v) => (v - shift).exp(),
            Err(_) => f64::NAN,
        };
        let qopts = QuadOptions {
            rel_tol: opts.rel_tol,
            abs_tol: 0.0,
            max_panels: 8000,
        };
        let integral = quadrature::integrate(integrand, &breakpoints, qopts)
            .map_err(|e| GfdError::Build(e.to_string()))?;
        let mass = integral.value;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(GfdError::Build(format!("normalizing integral is {mass}")));
        }
        let mut cum = Vec::with_capacity(integral.panels.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for p in &integral.panels {
            acc += p.mass;
            cum.push(acc / mass);
        }
        Ok(Self {
            model,
            weight,
            sample,
            n,
            lo,
            hi,
            breakpoints,
            center,
            shift,
            mass,
            panels: integral.panels,
            cum,
            mle,
            warnings,
            opts,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// θ̂ for regular models, the support midpoint otherwise.
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn mle(&self) -> Option<&MleResult> {
        self.mle.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Log of the normalizing constant of `exp(n L_n + log w)`.
    pub fn log_normalizer(&self) -> f64 {
        self.shift + self.mass.ln()
    }

    fn unnormalized(&self, t: f64) -> f64 {
        let v = self.n * self.model.loglik(self.sample.stats(), t)
            + self
                .weight
                .log_weight(&self.model, self.sample, t)
                .unwrap_or(f64::NEG_INFINITY);
        (v - self.shift).exp()
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        if theta < self.lo || theta > self.hi {
            return 0.0;
        }
        self.unnormalized(theta) / self.mass
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= self.lo {
            return 0.0;
        }
        if theta >= self.hi {
            return 1.0;
        }
        let i = self.panels.partition_point(|p| p.a <= theta) - 1;
        let p = self.panels[i];
        // Accepted panels pass the Gauss–Kronrod test, so the embedded Gauss
        // rule is accurate on any sub-panel.
        let part = gauss10(&mut |t| self.unnormalized(t), p.a, theta);
        (self.cum[i] + part / self.mass).clamp(self.cum[i], self.cum[i + 1])
    }

    pub fn quantile(&self, p: f64) -> Result<QuantileResult> {
        if !(p > 0.0 && p < 1.0) {
            return Err(GfdError::Domain {
                theta: p,
                lower: 0.0,
                upper: 1.0,
            });
        }
        let i = (self.cum.partition_point(|&c| c <= p) - 1).min(self.panels.len() - 1);
        let panel = self.panels[i];
        let (mut a, mut b) = (panel.a, panel.b);
        let (fa, fb) = (self.cum[i] - p, self.cum[i + 1] - p);
        let mut t = if fb > fa {
            a + (b - a) * (-fa / (fb - fa))
        } else {
            0.5 * (a + b)
        };
        let mut best = (t, f64::INFINITY);
        for _ in 0..100 {
            let g = self.cdf(t) - p;
            if g.abs() < best.1 {
                best = (t, g.abs());
            }
            if g.abs() <= self.opts.quantile_tol {
                break;
            }
            if g < 0.0 {
                a = t;
            } else {
                b = t;
            }
            let d = self.pdf(t);
            let newton = t - g / d;
            t = if d > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 4.0 * f64::EPSILON * t.abs().max(1e-300) {
                break;
            }
        }
        let (theta_p, err) = best;
        if err > 1e-8 {
            return Err(GfdError::Numeric(format!(
                "quantile({p}) stalled with cdf error {err:e}"
            )));
        }
        Ok(QuantileResult {
            p,
            theta_p,
            cdf_error: err,
        })
    }

    /// Equal-tailed interval at the given level: `(lo, hi, hi - lo)`.
    pub fn equal_tailed_interval(&self, level: f64) -> Result<(f64, f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(GfdError::Domain {
                theta: level,
                lower: 0.0,
                upper: 1.0,
            });
        }
        let tail = 0.5 * (1.0 - level);
        let lo = self.quantile(tail)?.theta_p;
        let hi = self.quantile(1.0 - tail)?.theta_p;
        Ok((lo, hi, hi - lo))
    }

    /// `(θ, pdf, cdf)` on a uniform grid over the bracket.
    pub fn dump(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let m = points.max(2);
        (0..m)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / (m - 1) as f64;
                (t, self.pdf(t), self.cdf(t))
            })
            .collect()
    }

    /// Total mass recomputed by integrating the normalized pdf.
    pub fn normalization_check(&self) -> Result<f64> {
        let r = quadrature::integrate(|t| self.pdf(t), &self.breakpoints, QuadOptions::default())?;
        Ok(r.value)
    }
}

/// Convenience wrapper around [`FiducialDensity::build`].
pub fn build_density<'a>(
    model: Model,
    weight: &'a dyn Weight,
    sample: &'a Sample,
    opts: DensityOptions,
) -> Result<FiducialDensity<'a>> {
    FiducialDensity::build(model, weight, sample, opts)
}
