//! Print Δ1 and Δ2 for every regular model and DGE at a few reference values,
//! by both the analytic and the finite-difference route.

use gfd::matching::{match_report, ATerms, Route};
use gfd::{Dge, InvCdfWeight, Model};

fn main() -> gfd::Result<()> {
    let cases: Vec<(Model, Vec<f64>)> = vec![
        (Model::LocationNormal, vec![0.0, 2.0]),
        (Model::ScaleExponential, vec![0.5, 1.0, 3.0]),
        (Model::GammaShape, vec![0.7, 2.0, 5.0]),
        (Model::scaled_normal(1.0)?, vec![0.5, 1.0, 3.0]),
        (Model::scaled_normal(2.0)?, vec![1.0, 2.5]),
        (Model::BivnormRho, vec![-0.75, 0.0, 0.5, 0.9]),
    ];
    let dges = [
        Dge::Simple,
        Dge::Suffstat,
        Dge::Matched,
        Dge::Jeffreys,
        Dge::InvCdf(InvCdfWeight::Unit),
        Dge::InvCdf(InvCdfWeight::Recip),
    ];
    println!(
        "{:<18} {:<13} {:>7} {:>14} {:>14} {:>10} {:>10}  order",
        "model", "dge", "theta0", "delta1", "delta2", "fd d1", "fd d2"
    );
    for (model, thetas) in &cases {
        for dge in dges.iter().filter(|d| d.supports(model)) {
            for &t in thetas {
                let a = match_report(model, dge, t, ATerms::default(), 0.05, Route::Analytic)?;
                let f = match_report(
                    model,
                    dge,
                    t,
                    ATerms::default(),
                    0.05,
                    Route::FiniteDifference,
                )?;
                println!(
                    "{:<18} {:<13} {:>7} {:>14.6e} {:>14.6e} {:>10.1e} {:>10.1e}  {:?}",
                    format!(
                        "{model}{}",
                        model.q().map(|q| format!("(q={q})")).unwrap_or_default()
                    ),
                    dge.to_string(),
                    t,
                    a.delta1,
                    a.delta2,
                    (a.delta1 - f.delta1).abs(),
                    (a.delta2 - f.delta2).abs(),
                    a.order
                );
            }
        }
    }
    Ok(())
}
