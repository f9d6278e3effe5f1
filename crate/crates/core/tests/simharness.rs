use gfd::simharness::{
    binomial_se, exactness_suite, replication_rng, run, run_one_sided, with_jobs, write_csv,
    Metric, Metrics, SimConfig, CSV_HEADER,
};
use gfd::GfdError;
use rand::Rng;

fn small(model: &str, theta0: f64, n: usize, methods: &[&str], reps: usize) -> SimConfig {
    let mut cfg = SimConfig::new(model, &[theta0], &[n], methods);
    cfg.reps = reps;
    cfg.seed = 2024;
    cfg
}

#[test]
fn worker_count_does_not_change_rows() {
    let cfg = small("bivnorm-rho", 0.5, 10, &["FS", "F1", "BJ"], 300);
    let serial = with_jobs(1, || run(&cfg, Metrics::ALL)).unwrap().unwrap();
    for jobs in [2, 4, 7] {
        let par = with_jobs(jobs, || run(&cfg, Metrics::ALL))
            .unwrap()
            .unwrap();
        assert_eq!(serial, par, "jobs={jobs}");
    }
}

#[test]
fn coverage_se_is_binomial() {
    let cfg = small("scaled-normal", 1.0, 10, &["FS", "BJ"], 250);
    for r in run(&cfg, Metrics::ALL).unwrap() {
        match r.metric {
            Metric::OneSidedCoverage | Metric::TwoSidedCoverage => {
                assert!((0.0..=1.0).contains(&r.value));
                assert_eq!(r.mc_se, binomial_se(r.value, r.reps));
                assert_eq!(r.mc_se, (r.value * (1.0 - r.value) / 250.0).sqrt());
            }
            Metric::Length | Metric::Mad => assert!(r.value > 0.0 && r.mc_se > 0.0),
        }
    }
}

#[test]
fn two_sided_is_difference_of_one_sided() {
    for level in [0.8, 0.9] {
        let mut cfg = small("gamma-shape", 2.0, 5, &["invcdf:recip"], 400);
        let tail = 0.5 * (1.0 - level);
        cfg.alphas = vec![tail, 1.0 - tail];
        cfg.levels = vec![level];
        let rows = run(&cfg, Metrics::ALL).unwrap();
        let get = |m: Metric, a: f64| {
            rows.iter()
                .find(|r| r.metric == m && r.alpha == a)
                .unwrap()
                .value
        };
        let two = get(Metric::TwoSidedCoverage, level);
        let one = get(Metric::OneSidedCoverage, 1.0 - tail) - get(Metric::OneSidedCoverage, tail);
        assert!((two - one).abs() <= 1e-12, "level {level}: {two} vs {one}");
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = small("scale-exponential", 1.0, 3, &["simple"], 200);
    let a = run_one_sided(&cfg).unwrap();
    assert_eq!(a, run_one_sided(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a, run_one_sided(&other).unwrap());
}

#[test]
fn exact_families_cover_at_nominal_rates() {
    let alphas = [0.025, 0.05, 0.5, 0.95, 0.975];
    let rep = exactness_suite(&[2, 3], &alphas, 1000, 8).unwrap();
    assert_eq!(rep.cells.len(), 4 * 2 * 5);
    for c in &rep.cells {
        assert!(c.pass, "{c:?}");
        assert_eq!(c.tolerance, 4.0 * binomial_se(c.alpha, 1000));
    }
    assert!(rep.pass);
}

#[test]
fn streams_depend_on_every_coordinate() {
    let base: u64 = replication_rng(5, 1.0, 10, 0, 0).random();
    for (s, t, n, r, k) in [
        (6, 1.0, 10, 0, 0),
        (5, 1.5, 10, 0, 0),
        (5, 1.0, 11, 0, 0),
        (5, 1.0, 10, 1, 0),
        (5, 1.0, 10, 0, 1),
    ] {
        let v: u64 = replication_rng(s, t, n, r, k).random();
        assert_ne!(base, v);
    }
}

#[test]
fn degenerate_draws_are_redrawn_and_counted() {
    let cfg = small("scaled-normal", 1.0, 10, &["F1"], 2000);
    let rows = run(
        &cfg,
        Metrics {
            mad: true,
            ..Metrics::default()
        },
    )
    .unwrap();
    assert!(rows[0].failures > 0);
    // At n = 2 about 8% of samples have a negative mean: too many to hide.
    let cfg = small("scaled-normal", 1.0, 2, &["F1"], 200);
    assert!(matches!(
        run(&cfg, Metrics::ALL),
        Err(GfdError::Experiment(_))
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    let ok = small("bivnorm-rho", 0.5, 10, &["FS"], 10);
    let mut c = ok.clone();
    c.reps = 0;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.alphas = vec![1.0];
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.n = vec![1];
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.theta0 = vec![1.0];
    assert!(matches!(c.validate(), Err(GfdError::Domain { .. })));
    let mut c = ok.clone();
    c.methods = vec!["invcdf:recip".into()];
    assert!(c.validate().is_err());
    assert!(small("nosuch", 0.5, 10, &["FS"], 10).validate().is_err());
    assert!(ok.validate().is_ok());
}

#[test]
fn config_json_defaults_and_strictness() {
    let c: SimConfig =
        serde_json::from_str(r#"{"model":"bivnorm-rho","theta0":[0.5],"n":[10],"methods":["FS"]}"#)
            .unwrap();
    assert_eq!(
        (c.reps, c.seed, c.alphas.len(), c.levels.len()),
        (5000, 0, 5, 2)
    );
    let bad = r#"{"model":"bivnorm-rho","theta0":[0.5],"n":[10],"methods":["FS"],"extra":1}"#;
    assert!(serde_json::from_str::<SimConfig>(bad).is_err());
    let back: SimConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn csv_layout() {
    let cfg = small("location-normal", 0.0, 2, &["simple"], 50);
    let rows = run(&cfg, Metrics::ALL).unwrap();
    let mut out = Vec::new();
    write_csv(&mut out, &["gfd simulate".into()], &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# gfd simulate");
    assert_eq!(lines[1], CSV_HEADER);
    assert_eq!(lines.len(), 2 + rows.len());
    for (line, row) in lines[2..].iter().zip(&rows) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 11);
        assert_eq!(f[4], row.metric.id());
        let v: f64 = f[6].parse().unwrap();
        assert_eq!(v, row.value);
        let mantissa = f[6].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
    }
}
