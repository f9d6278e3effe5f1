mod common;

use common::{combos, rel_err, sample};
use gfd::dge::weighted_invcdf_jacobian;
use gfd::numdiff;
use gfd::{Dge, GfdError, InvCdfWeight, Model, Sample};
use rand::Rng;

fn random_theta(model: &Model, theta0: f64, rng: &mut impl Rng) -> f64 {
    match model {
        Model::BivnormRho => rng.random_range(-0.95..0.95),
        Model::LocationNormal => theta0 + rng.random_range(-3.0..3.0),
        _ => theta0 * rng.random_range(0.2..3.0),
    }
}

#[test]
fn jacobians_are_positive() {
    let mut rng = common::rng(8);
    for (m, d, t0) in combos() {
        let mut checked = 0;
        for i in 0..1000u64 {
            let n = 2 + (i % 20) as usize;
            let s = sample(&m, t0, n, 10_000 + i);
            let th = random_theta(&m, t0, &mut rng);
            match d.jacobian(&m, &s, th) {
                Ok(j) => {
                    assert!(j > 0.0 && j.is_finite(), "{m} {d} θ={th}: {j}");
                    checked += 1;
                }
                // Declared degenerate cases: zero at a kink, non-positive mean.
                Err(GfdError::Degenerate(_)) => {}
                Err(e) => panic!("{m} {d} θ={th}: {e}"),
            }
        }
        assert!(checked > 900, "{m} {d}: only {checked} checked");
    }
}

#[test]
fn translation_jacobian_counts_observations() {
    let s = sample(&Model::LocationNormal, 1.0, 7, 3);
    for d in [Dge::Simple, Dge::InvCdf(InvCdfWeight::Unit)] {
        assert_eq!(d.jacobian(&Model::LocationNormal, &s, -0.4).unwrap(), 7.0);
    }
}

#[test]
fn gamma_recip_weight_is_positive() {
    let d = Dge::InvCdf(InvCdfWeight::Recip);
    for seed in 0..20 {
        let s = sample(&Model::GammaShape, 2.0, 5, seed);
        for th in [0.05, 0.5, 2.0, 9.0, 40.0] {
            assert!(d.jacobian(&Model::GammaShape, &s, th).unwrap() > 0.0);
        }
    }
}

#[test]
fn weight_is_linear() {
    for (m, t0) in [
        (Model::GammaShape, 2.0),
        (Model::ScaleExponential, 1.0),
        (Model::ScaledNormal { q: 1.0 }, 2.0),
    ] {
        let s = sample(&m, t0, 9, 1);
        let w = |x: f64| 1.0 + x * x;
        let a = weighted_invcdf_jacobian(&m, w, &s, 1.3 * t0).unwrap();
        let b = weighted_invcdf_jacobian(&m, |x| 2.0 * w(x), &s, 1.3 * t0).unwrap();
        assert_eq!(b, 2.0 * a);
    }
}

#[test]
fn weighted_form_agrees_with_builtin() {
    for (m, w, d) in [
        (Model::GammaShape, InvCdfWeight::Recip, "invcdf:recip"),
        (Model::ScaleExponential, InvCdfWeight::Unit, "invcdf:unit"),
        (Model::ScaledNormal { q: 1.5 }, InvCdfWeight::Unit, "simple"),
    ] {
        let s = sample(&m, 1.4, 12, 2);
        let d: Dge = d.parse().unwrap();
        for th in [0.7, 1.4, 2.9] {
            let a = weighted_invcdf_jacobian(&m, |x| w.eval(x), &s, th).unwrap();
            let b = d.jacobian(&m, &s, th).unwrap();
            assert!(rel_err(a, b) < 1e-12, "{m} {d} θ={th}: {a} vs {b}");
        }
    }
}

#[test]
fn jeffreys_weights() {
    let s = sample(&Model::LocationNormal, 0.0, 4, 1);
    assert_eq!(
        Dge::Jeffreys
            .jacobian(&Model::LocationNormal, &s, 3.0)
            .unwrap(),
        1.0
    );
    let s = sample(&Model::ScaleExponential, 1.0, 4, 1);
    for th in [0.3, 1.0, 4.0] {
        let j = Dge::Jeffreys
            .jacobian(&Model::ScaleExponential, &s, th)
            .unwrap();
        assert!(rel_err(j, 1.0 / th) < 1e-15);
    }
    let s = sample(&Model::BivnormRho, 0.0, 4, 1);
    assert_eq!(
        Dge::Jeffreys.jacobian(&Model::BivnormRho, &s, 0.0).unwrap(),
        1.0
    );
}

#[test]
fn unsupported_pairs_are_rejected() {
    let s = sample(&Model::GammaShape, 2.0, 4, 1);
    assert!(matches!(
        Dge::Simple.jacobian(&Model::GammaShape, &s, 2.0),
        Err(GfdError::Unsupported(_))
    ));
    let p = sample(&Model::BivnormRho, 0.2, 4, 1);
    assert!(Dge::InvCdf(InvCdfWeight::Unit)
        .jacobian(&Model::BivnormRho, &p, 0.2)
        .is_err());
    assert!("FS".parse::<Dge>().is_ok());
    assert!("nosuch".parse::<Dge>().is_err());
}

#[test]
fn matched_scaled_normal_needs_positive_mean() {
    let s = Sample::scalar(vec![-1.0, -2.0, 0.5]).unwrap();
    let r = Dge::Matched.jacobian(&Model::ScaledNormal { q: 1.0 }, &s, 1.0);
    assert!(matches!(r, Err(GfdError::Degenerate(_))));
}

#[test]
fn sample_jacobian_approaches_limit() {
    for (m, d, t0) in combos() {
        let grid: Vec<f64> = match m {
            Model::BivnormRho => [-0.2, -0.1, 0.0, 0.1, 0.2].iter().map(|o| t0 + o).collect(),
            Model::LocationNormal => [-0.5, -0.25, 0.0, 0.25, 0.5]
                .iter()
                .map(|o| t0 + o)
                .collect(),
            _ => [0.8, 0.9, 1.0, 1.1, 1.2].iter().map(|f| t0 * f).collect(),
        };
        let mut errs = Vec::new();
        for n in [100usize, 1_000, 10_000] {
            // Relative error, averaged over fixed seeds so a single lucky draw
            // cannot break monotonicity.
            let seeds = 16;
            let mut total = 0.0;
            for seed in 0..seeds {
                let s = sample(&m, t0, n, 700 + seed);
                total += grid
                    .iter()
                    .map(|&th| {
                        let jn = d.jacobian(&m, &s, th).unwrap() / d.n_scaling(&m, n);
                        let lim = d.limit_jacobian(&m, t0, th, 0).unwrap();
                        (jn - lim).abs() / lim
                    })
                    .fold(0.0, f64::max);
            }
            errs.push(total / seeds as f64);
        }
        assert!(
            errs[0] >= errs[1] && errs[1] >= errs[2],
            "{m} {d}: {errs:?}"
        );
        assert!(errs[2] < 0.05, "{m} {d}: {errs:?}");
    }
}

#[test]
fn second_derivatives_are_smooth_between_kinks() {
    for (m, d, t0) in combos() {
        let s = sample(&m, t0, 8, 5);
        let (lo, hi) = match m {
            Model::BivnormRho => (-0.9, 0.9),
            Model::LocationNormal => (t0 - 2.0, t0 + 2.0),
            _ => (0.3 * t0, 3.0 * t0),
        };
        let mut edges = vec![lo];
        edges.extend(d.kink_points(&m, &s, lo, hi));
        edges.push(hi);
        for seg in edges.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let pad = 0.02 * (b - a);
            for i in 0..50 {
                let th = a + pad + (b - a - 2.0 * pad) * i as f64 / 49.0;
                let exact = match d.jacobian_deriv(&m, &s, th, 2) {
                    Ok(v) => v,
                    Err(GfdError::Degenerate(_)) => continue,
                    Err(e) => panic!("{m} {d} θ={th}: {e}"),
                };
                let scale = d.jacobian(&m, &s, th).unwrap().max(1.0);
                let fd = d.jacobian_deriv_numeric(&m, &s, th, 2).unwrap();
                assert!(
                    (fd - exact).abs() < 1e-4 * scale.max(exact.abs()),
                    "{m} {d} θ={th}: {fd} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn first_derivatives_match_differences() {
    for (m, d, t0) in combos() {
        let s = sample(&m, t0, 15, 6);
        let th = if matches!(m, Model::BivnormRho | Model::LocationNormal) {
            t0 + 0.07
        } else {
            1.07 * t0
        };
        let exact = d.jacobian_deriv(&m, &s, th, 1).unwrap();
        let fd = d.jacobian_deriv_numeric(&m, &s, th, 1).unwrap();
        let scale = d.jacobian(&m, &s, th).unwrap().max(1.0);
        assert!(
            (fd - exact).abs() < 1e-7 * scale,
            "{m} {d}: {fd} vs {exact}"
        );
    }
}

#[test]
fn limit_derivatives_match_differences() {
    for (m, d, t0) in combos() {
        let dom = m.domain();
        let kinks = d.limit_kinks(&m, t0, dom.lower, dom.upper);
        let pts: Vec<f64> = match m {
            Model::BivnormRho => vec![-0.6, 0.1, 0.5, 0.8],
            Model::LocationNormal => vec![-1.0, 0.3, 2.0],
            _ => vec![0.6 * t0, t0, 1.7 * t0],
        };
        for th in pts {
            let f = |order: usize| move |t: f64| d.limit_jacobian(&m, t0, t, order).unwrap();
            for order in 1..=2 {
                let exact = d.limit_jacobian(&m, t0, th, order).unwrap();
                let fd = numdiff::derivative(f(order - 1), th, 1, &kinks);
                assert!(
                    rel_err(fd, exact) < 1e-7,
                    "{m} {d} θ0={t0} θ={th} order {order}: {fd} vs {exact}"
                );
            }
        }
    }
}
