//! Deterministic Monte Carlo coverage experiments.
//!
//! Replication `r` of cell `(θ0, n)` draws its sample from a ChaCha8 stream
//! keyed by `(seed, θ0, n)` with stream id `r`; a method that cannot use a
//! draw retries from a disjoint word offset of the same stream. Results are
//! collected in replication order, so output does not depend on the number
//! of worker threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dge::Dge;
use crate::error::{GfdError, Result};
use crate::fiducial::{DensityOptions, FiducialDensity};
use crate::models::{Model, Sample};

pub const DEFAULT_ALPHAS: [f64; 5] = [0.025, 0.05, 0.5, 0.95, 0.975];
pub const DEFAULT_LEVELS: [f64; 2] = [0.90, 0.95];
const MAX_RETRIES: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub theta0: Vec<f64>,
    pub n: Vec<usize>,
    /// Method labels: FS, F1, BJ, suffstat, or any DGE id.
    pub methods: Vec<String>,
    /// One-sided columns: coverage of the `p`-quantile for each listed `p`.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}
fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}
fn default_reps() -> usize {
    5000
}

impl SimConfig {
    pub fn new(model: &str, theta0: &[f64], n: &[usize], methods: &[&str]) -> Self {
        Self {
            model: model.to_string(),
            q: None,
            theta0: theta0.to_vec(),
            n: n.to_vec(),
            methods: methods.iter().map(|m| m.to_string()).collect(),
            alphas: default_alphas(),
            levels: default_levels(),
            reps: default_reps(),
            seed: 0,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::parse(&self.model, self.q)
    }

    pub fn validate(&self) -> Result<(Model, Vec<Dge>)> {
        let model = self.model()?;
        if self.reps == 0 {
            return Err(GfdError::Input("reps must be at least 1".into()));
        }
        for &a in self.alphas.iter().chain(&self.levels) {
            if !(a > 0.0 && a < 1.0) {
                return Err(GfdError::Input(format!("probability {a} not in (0, 1)")));
            }
        }
        for &t in &self.theta0 {
            model.domain().check(t)?;
        }
        if self.n.iter().any(|&n| n < 2) {
            return Err(GfdError::Input("sample sizes must be at least 2".into()));
        }
        let dges = self
            .methods
            .iter()
            .map(|m| {
                let d: Dge = m.parse()?;
                if d.supports(&model) {
                    Ok(d)
                } else {
                    Err(GfdError::Input(format!(
                        "method '{m}' is not defined for {model}"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((model, dges))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    OneSidedCoverage,
    TwoSidedCoverage,
    Length,
    Mad,
}

impl Metric {
    pub fn id(&self) -> &'static str {
        match self {
            Metric::OneSidedCoverage => "one-sided-coverage",
            Metric::TwoSidedCoverage => "two-sided-coverage",
            Metric::Length => "length",
            Metric::Mad => "mad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub model: String,
    pub method: String,
    pub theta0: f64,
    pub n: usize,
    pub metric: Metric,
    /// The quantile level for one-sided rows, the interval level for
    /// two-sided and length rows, 0.5 for MAD rows.
    pub alpha: f64,
    pub value: f64,
    pub mc_se: f64,
    pub reps: usize,
    pub seed: u64,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metrics {
    pub one_sided: bool,
    pub two_sided: bool,
    pub mad: bool,
}

impl Metrics {
    pub const ALL: Metrics = Metrics {
        one_sided: true,
        two_sided: true,
        mad: true,
    };
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream for replication `rep`, retry `retry` of cell `(θ0, n)`.
pub fn replication_rng(seed: u64, theta0: f64, n: usize, rep: u64, retry: u64) -> ChaCha8Rng {
    let mut st = seed;
    let a = splitmix(&mut st);
    st ^= theta0.to_bits();
    let b = splitmix(&mut st);
    st ^= n as u64;
    let c = splitmix(&mut st);
    let d = splitmix(&mut st);
    let mut key = [0u8; 32];
    for (i, w) in [a, b, c, d].iter().enumerate() {
        key[8 * i..8 * i + 8].copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(rep);
    rng.set_word_pos((retry as u128) << 48);
    rng
}

#[derive(Debug, Clone)]
struct RepOutcome {
    one_sided: Vec<bool>,
    two_sided: Vec<bool>,
    lengths: Vec<f64>,
    abs_dev: f64,
    retries: usize,
}

struct Cell<'c> {
    model: Model,
    dge: Dge,
    theta0: f64,
    n: usize,
    cfg: &'c SimConfig,
    metrics: Metrics,
}

impl Cell<'_> {
    fn evaluate(&self, sample: &Sample) -> Result<RepOutcome> {
        let d = FiducialDensity::build(self.model, &self.dge, sample, DensityOptions::default())?;
        let mut out = RepOutcome {
            one_sided: Vec::new(),
            two_sided: Vec::new(),
            lengths: Vec::new(),
            abs_dev: 0.0,
            retries: 0,
        };
        if self.metrics.one_sided {
            for &p in &self.cfg.alphas {
                out.one_sided.push(self.theta0 <= d.quantile(p)?.theta_p);
            }
        }
        if self.metrics.two_sided {
            for &level in &self.cfg.levels {
                let (lo, hi, len) = d.equal_tailed_interval(level)?;
                out.two_sided.push(lo <= self.theta0 && self.theta0 <= hi);
                out.lengths.push(len);
            }
        }
        if self.metrics.mad {
            out.abs_dev = (d.quantile(0.5)?.theta_p - self.theta0).abs();
        }
        Ok(out)
    }

    fn replicate(&self, rep: u64) -> Result<RepOutcome> {
        let mut last = None;
        for retry in 0..MAX_RETRIES {
            let mut rng = replication_rng(self.cfg.seed, self.theta0, self.n, rep, retry);
            let sample = self.model.sample_data(self.theta0, self.n, &mut rng)?;
            match self.evaluate(&sample) {
                Ok(mut o) => {
                    o.retries = retry as usize;
                    return Ok(o);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(GfdError::Experiment(format!(
            "replication {rep} failed {MAX_RETRIES} times; last error: {}",
            last.map(|e| e.to_string()).unwrap_or_default()
        )))
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `√(p̂(1 − p̂)/reps)`
pub fn binomial_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// Run the selected metrics for every `(θ0, n, method)` cell.
pub fn run(cfg: &SimConfig, metrics: Metrics) -> Result<Vec<CoverageRow>> {
    let (model, dges) = cfg.validate()?;
    let mut rows = Vec::new();
    for &theta0 in &cfg.theta0 {
        for &n in &cfg.n {
            for (label, &dge) in cfg.methods.iter().zip(&dges) {
                let cell = Cell {
                    model,
                    dge,
                    theta0,
                    n,
                    cfg,
                    metrics,
                };
                let outcomes: Vec<RepOutcome> = (0..cfg.reps as u64)
                    .into_par_iter()
                    .map(|r| cell.replicate(r))
                    .collect::<Result<Vec<_>>>()?;
                let failures: usize = outcomes.iter().map(|o| o.retries).sum();
                if failures * 100 > cfg.reps {
                    return Err(GfdError::Experiment(format!(
                        "{model} {label} θ0={theta0} n={n}: {failures} failed draws in {} replications",
                        cfg.reps
                    )));
                }
                let row = |metric, alpha, value, mc_se| CoverageRow {
                    model: model.id().to_string(),
                    method: label.clone(),
                    theta0,
                    n,
                    metric,
                    alpha,
                    value,
                    mc_se,
                    reps: cfg.reps,
                    seed: cfg.seed,
                    failures,
                };
                let reps = cfg.reps as f64;
                if metrics.one_sided {
                    for (i, &p) in cfg.alphas.iter().enumerate() {
                        let hits = outcomes.iter().filter(|o| o.one_sided[i]).count();
                        let v = hits as f64 / reps;
                        rows.push(row(
                            Metric::OneSidedCoverage,
                            p,
                            v,
                            binomial_se(v, cfg.reps),
                        ));
                    }
                }
                if metrics.two_sided {
                    for (i, &level) in cfg.levels.iter().enumerate() {
                        let hits = outcomes.iter().filter(|o| o.two_sided[i]).count();
                        let v = hits as f64 / reps;
                        rows.push(row(
                            Metric::TwoSidedCoverage,
                            level,
                            v,
                            binomial_se(v, cfg.reps),
                        ));
                        let lens: Vec<f64> = outcomes.iter().map(|o| o.lengths[i]).collect();
                        let (m, se) = mean_se(&lens);
                        rows.push(row(Metric::Length, level, m, se));
                    }
                }
                if metrics.mad {
                    let devs: Vec<f64> = outcomes.iter().map(|o| o.abs_dev).collect();
                    let (m, se) = mean_se(&devs);
                    rows.push(row(Metric::Mad, 0.5, m, se));
                }
            }
        }
    }
    Ok(rows)
}

pub fn run_one_sided(cfg: &SimConfig) -> Result<Vec<CoverageRow>> {
    run(
        cfg,
        Metrics {
            one_sided: true,
            ..Metrics::default()
        },
    )
}

pub fn run_two_sided(cfg: &SimConfig) -> Result<Vec<CoverageRow>> {
    run(
        cfg,
        Metrics {
            two_sided: true,
            ..Metrics::default()
        },
    )
}

pub fn run_mad(cfg: &SimConfig) -> Result<Vec<CoverageRow>> {
    run(
        cfg,
        Metrics {
            mad: true,
            ..Metrics::default()
        },
    )
}

/// Run `f` on a dedicated pool with `jobs` workers.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| GfdError::Experiment(e.to_string()))?;
    Ok(pool.install(f))
}

pub const CSV_HEADER: &str = "model,method,theta0,n,metric,alpha,value,mc_se,reps,seed,failures";

/// Write rows as CSV, preceded by `#`-prefixed comment lines.
pub fn write_csv<W: Write>(mut w: W, comments: &[String], rows: &[CoverageRow]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.model,
            r.method,
            r.theta0,
            r.n,
            r.metric.id(),
            r.alpha,
            r.value,
            r.mc_se,
            r.reps,
            r.seed,
            r.failures
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactnessCell {
    pub model: String,
    pub method: String,
    pub n: usize,
    pub alpha: f64,
    pub value: f64,
    /// Four nominal binomial standard errors.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactnessReport {
    pub rows: Vec<CoverageRow>,
    pub cells: Vec<ExactnessCell>,
    pub pass: bool,
}

/// The families whose fiducial distribution is exact, with their equation and
/// reference parameter.
pub fn exact_models() -> Vec<(Model, Dge, f64)> {
    vec![
        (
            Model::GammaShape,
            Dge::InvCdf(crate::dge::InvCdfWeight::Recip),
            2.0,
        ),
        (Model::LocationNormal, Dge::Simple, 0.0),
        (Model::ScaleExponential, Dge::Simple, 1.0),
        (Model::UniformLocation, Dge::Simple, 1.0),
    ]
}

/// One-sided coverage for each exact family; a cell passes when it lies
/// within four nominal binomial standard errors of its level.
pub fn exactness_suite(
    ns: &[usize],
    alphas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<ExactnessReport> {
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (model, dge, theta0) in exact_models() {
        let cfg = SimConfig {
            model: model.id().to_string(),
            q: None,
            theta0: vec![theta0],
            n: ns.to_vec(),
            methods: vec![dge.to_string()],
            alphas: alphas.to_vec(),
            levels: Vec::new(),
            reps,
            seed,
        };
        let r = run_one_sided(&cfg)?;
        for row in &r {
            let tol = 4.0 * binomial_se(row.alpha, reps);
            cells.push(ExactnessCell {
                model: row.model.clone(),
                method: row.method.clone(),
                n: row.n,
                alpha: row.alpha,
                value: row.value,
                tolerance: tol,
                pass: (row.value - row.alpha).abs() <= tol,
            });
        }
        rows.extend(r);
    }
    let pass = cells.iter().all(|c| c.pass);
    Ok(ExactnessReport { rows, cells, pass })
}
