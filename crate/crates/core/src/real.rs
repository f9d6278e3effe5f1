//! Scalar abstraction shared by plain `f64` evaluation and truncated Taylor
//! arithmetic.
//!
//! Every closed-form quantity in the crate (log-likelihoods, Jacobians, limit
//! Jacobians, Fisher information, `m3`) is written once, generic over [`Real`].
//! Evaluating with `f64` gives the value; evaluating with [`Taylor`] seeded by
//! [`Taylor::var`] gives exact θ-derivatives up to order `N - 1`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::special;

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn lgamma(self) -> Self;
    /// Polygamma function of order `k` (`k = 0` is digamma).
    fn polygamma(self, k: usize) -> Self;
    fn std_normal_cdf(self) -> Self;
    /// Largest absolute coefficient; used for convergence tests.
    fn max_abs(self) -> f64;

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }

    fn powi(self, k: i32) -> Self {
        self.powf(k as f64)
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn lgamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self)
    }
    fn polygamma(self, k: usize) -> Self {
        special::polygamma(k, self)
    }
    fn std_normal_cdf(self) -> Self {
        special::norm_cdf(self)
    }
    fn max_abs(self) -> f64 {
        f64::abs(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

/// Truncated Taylor series `Σ c[k] h^k`, with `c[k] = f^(k)(θ) / k!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor<const N: usize> {
    pub c: [f64; N],
}

const FACT: [f64; 10] = [
    1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0,
];

impl<const N: usize> Taylor<N> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }

    /// The independent variable evaluated at `x`.
    pub fn var(x: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x;
        if N > 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    /// k-th derivative.
    pub fn deriv(&self, k: usize) -> f64 {
        self.c[k] * FACT[k]
    }

    /// Series of the derivative; the top coefficient becomes zero.
    pub fn derivative(&self) -> Self {
        let mut c = [0.0; N];
        for k in 0..N.saturating_sub(1) {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Self { c }
    }

    /// Compose an outer function with known derivatives `d[k] = g^(k)(c[0])`.
    pub fn compose(self, d: &[f64; N]) -> Self {
        let mut delta = self;
        delta.c[0] = 0.0;
        let mut out = Self::constant(d[0]);
        let mut pow = Self::constant(1.0);
        for (k, dk) in d.iter().enumerate().skip(1) {
            pow = pow * delta;
            let coef = dk / FACT[k];
            for j in 0..N {
                out.c[j] += coef * pow.c[j];
            }
        }
        out
    }
}

impl<const N: usize> Add for Taylor<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl<const N: usize> Sub for Taylor<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..N {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl<const N: usize> Neg for Taylor<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for k in 0..N {
            self.c[k] = -self.c[k];
        }
        self
    }
}

impl<const N: usize> Mul for Taylor<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; N];
        for k in 0..N {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            c[k] = s;
        }
        Self { c }
    }
}

impl<const N: usize> Div for Taylor<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut q = [0.0; N];
        for k in 0..N {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= rhs.c[j] * q[k - j];
            }
            q[k] = s / rhs.c[0];
        }
        Self { c: q }
    }
}

impl<const N: usize> Add<f64> for Taylor<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Taylor<N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.c[0] -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Taylor<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        for k in 0..N {
            self.c[k] *= rhs;
        }
        self
    }
}

impl<const N: usize> Div<f64> for Taylor<N> {
    type Output = Self;
    fn div(mut self, rhs: f64) -> Self {
        for k in 0..N {
            self.c[k] /= rhs;
        }
        self
    }
}

impl<const N: usize> Real for Taylor<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }

    fn value(self) -> f64 {
        self.c[0]
    }

    // Sign is frozen at the expansion point; callers check kinks separately.
    fn abs(self) -> Self {
        if self.c[0] < 0.0 {
            -self
        } else {
            self
        }
    }

    fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    fn ln(self) -> Self {
        let a0 = self.c[0];
        let mut l = [0.0; N];
        l[0] = a0.ln();
        for k in 1..N {
            let mut s = self.c[k];
            for j in 1..k {
                s -= (j as f64) * l[j] * self.c[k - j] / (k as f64);
            }
            l[k] = s / a0;
        }
        Self { c: l }
    }

    fn exp(self) -> Self {
        let mut e = [0.0; N];
        e[0] = self.c[0].exp();
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += (j as f64) * self.c[j] * e[k - j];
            }
            e[k] = s / (k as f64);
        }
        Self { c: e }
    }

    fn powf(self, r: f64) -> Self {
        let a0 = self.c[0];
        let mut p = [0.0; N];
        p[0] = a0.powf(r);
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += ((j as f64) * (r + 1.0) - k as f64) * self.c[j] * p[k - j];
            }
            p[k] = s / (k as f64 * a0);
        }
        Self { c: p }
    }

    fn lgamma(self) -> Self {
        let x = self.c[0];
        let mut d = [0.0; N];
        d[0] = statrs::function::gamma::ln_gamma(x);
        for (k, dk) in d.iter_mut().enumerate().skip(1) {
            *dk = special::polygamma(k - 1, x);
        }
        self.compose(&d)
    }

    fn polygamma(self, order: usize) -> Self {
        let x = self.c[0];
        let mut d = [0.0; N];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = special::polygamma(order + k, x);
        }
        self.compose(&d)
    }

    fn std_normal_cdf(self) -> Self {
        let t = self.c[0];
        let pdf = special::norm_pdf(t);
        let mut d = [0.0; N];
        d[0] = special::norm_cdf(t);
        for (k, dk) in d.iter_mut().enumerate().skip(1) {
            // Φ^(k)(t) = (-1)^(k-1) He_{k-1}(t) φ(t)
            let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
            *dk = sign * special::hermite_he(k - 1, t) * pdf;
        }
        self.compose(&d)
    }

    fn max_abs(self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Value and first `N - 1` derivatives of `f` at `x`.
pub fn derivatives<const N: usize, F>(f: F, x: f64) -> [f64; N]
where
    F: Fn(Taylor<N>) -> Taylor<N>,
{
    let t = f(Taylor::var(x));
    let mut out = [0.0; N];
    for (k, o) in out.iter_mut().enumerate() {
        *o = t.deriv(k);
    }
    out
}
