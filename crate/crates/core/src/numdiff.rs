//! Kink-aware five-point central differences with one Richardson step.

/// Default step for a derivative of the given order at `x`.
pub fn default_step(x: f64, order: usize) -> f64 {
    let root = if order <= 1 { 1.0 / 3.0 } else { 0.25 };
    f64::EPSILON.powf(root) * x.abs().max(1.0)
}

/// Halve `h` until `[x - 2h, x + 2h]` contains no breakpoint.
pub fn shrink_step(x: f64, mut h: f64, kinks: &[f64]) -> f64 {
    while kinks.iter().any(|&k| (k - x).abs() <= 2.0 * h) && h > 1e-14 * x.abs().max(1.0) {
        h *= 0.5;
    }
    h
}

fn stencil<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64, order: usize) -> f64 {
    let (fm2, fm1, fp1, fp2) = (f(x - 2.0 * h), f(x - h), f(x + h), f(x + 2.0 * h));
    match order {
        1 => (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h),
        2 => (-fm2 + 16.0 * fm1 - 30.0 * f(x) + 16.0 * fp1 - fp2) / (12.0 * h * h),
        _ => panic!("stencil order {order} not supported"),
    }
}

/// Derivative of order 1 or 2 with Richardson extrapolation over `h, h/2`.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, order: usize, kinks: &[f64]) -> f64 {
    let h = shrink_step(x, default_step(x, order), kinks);
    let d1 = stencil(&f, x, h, order);
    let d2 = stencil(&f, x, 0.5 * h, order);
    (16.0 * d2 - d1) / 15.0
}
