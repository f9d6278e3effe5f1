use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gfd::fiducial::{build_density, DensityOptions};
use gfd::matching::{self, ATerms, Route};
use gfd::simharness::{self, Metrics, SimConfig, DEFAULT_ALPHAS};
use gfd::{Dge, GfdError, Model, Obs, Sample};

#[derive(Parser)]
#[command(
    name = "gfd",
    version,
    about = "Generalized fiducial distributions for one-parameter models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage, length and MAD tables by Monte Carlo.
    Simulate(SimulateArgs),
    /// Probability-matching coefficients as JSON.
    Delta(DeltaArgs),
    /// Closed-form scaled-normal Δ2 on a (μ, q) grid.
    Contour(ContourArgs),
    /// One-sided coverage of the exact families.
    Exactness(ExactnessArgs),
    /// Tabulate one fiducial density as `theta,pdf,cdf`.
    DensityDump(DumpArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file, or a CSV written by this command.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    theta0: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// FS, F1, BJ, suffstat or any DGE id.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to GFD_JOBS.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DeltaArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    dge: String,
    #[arg(long, allow_hyphen_values = true)]
    theta0: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    a0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    a1: f64,
    #[arg(long, value_enum, default_value_t = RouteArg::Analytic)]
    route: RouteArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Analytic,
    Fd,
}

#[derive(Args)]
struct ContourArgs {
    /// JSON config file, or a CSV written by this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `start:end:steps`
    #[arg(long, value_parser = parse_range)]
    mu_range: Option<Range>,
    #[arg(long, value_parser = parse_range)]
    q_range: Option<Range>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContourConfig {
    mu_range: Range,
    q_range: Range,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Range {
    start: f64,
    end: f64,
    steps: usize,
}

impl Range {
    fn grid(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.end - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + h * i as f64).collect()
    }
}

fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, k] = parts[..] else {
        return Err(format!("expected start:end:steps, got '{s}'"));
    };
    let start: f64 = a.parse().map_err(|_| format!("bad start '{a}'"))?;
    let end: f64 = b.parse().map_err(|_| format!("bad end '{b}'"))?;
    let steps: usize = k.parse().map_err(|_| format!("bad step count '{k}'"))?;
    Range { start, end, steps }.checked()
}

impl Range {
    fn checked(self) -> Result<Range, String> {
        let Range { start, end, steps } = self;
        if !(start > 0.0 && end >= start && end.is_finite() && steps >= 1) {
            return Err(format!(
                "range {start}:{end}:{steps} must satisfy 0 < start <= end and steps >= 1"
            ));
        }
        Ok(self)
    }
}

#[derive(Args)]
struct ExactnessArgs {
    /// JSON config file, or a CSV written by this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replications per cell [default: 5000].
    #[arg(long)]
    reps: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// [default: 2,3,5,10]
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExactnessConfig {
    #[serde(default = "default_reps")]
    reps: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_exact_n")]
    n: Vec<usize>,
}

fn default_reps() -> usize {
    5000
}

fn default_exact_n() -> Vec<usize> {
    vec![2, 3, 5, 10]
}

#[derive(Args)]
struct DumpArgs {
    /// JSON config file, or a CSV written by this command.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    dge: Option<String>,
    /// Comma-separated observations; pairs as `x:y`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "theta0")]
    data: Option<String>,
    /// Simulate the sample from this parameter instead of `--data`.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<f64>,
    /// Sample size for `--theta0` [default: 10].
    #[arg(long)]
    n: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size [default: 1024].
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpConfig {
    model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    dge: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta0: Option<f64>,
    #[serde(default = "default_dump_n")]
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_points")]
    points: usize,
}

fn default_dump_n() -> usize {
    10
}

fn default_points() -> usize {
    1024
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(String),
}

impl From<GfdError> for Failure {
    fn from(e: GfdError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Delta(a) => delta(a),
        Command::Contour(a) => contour(a),
        Command::Exactness(a) => exactness(a),
        Command::DensityDump(a) => density_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn jobs(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(j) = flag {
        return Ok(j);
    }
    match std::env::var("GFD_JOBS") {
        Ok(v) => v
            .parse()
            .map_err(|_| Failure::Usage(format!("GFD_JOBS='{v}' is not a count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn with_pool<T: Send>(flag: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    Ok(simharness::with_jobs(jobs(flag)?, f)?)
}

/// Open the output only after validation so that bad flags leave no file.
fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn header(command: &str, config: &impl Serialize) -> Vec<String> {
    let json = serde_json::to_string(config).expect("config serializes");
    vec![format!("gfd {command}"), format!("config {json}")]
}

/// A config from JSON, or from the `# config` line of an earlier output.
fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)?;
    let json = match text.lines().find_map(|l| l.strip_prefix("# config ")) {
        Some(j) => j.to_string(),
        None => text,
    };
    serde_json::from_str(&json).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => read_config::<SimConfig>(p)?,
        None => {
            let model = a
                .model
                .clone()
                .ok_or_else(|| Failure::Usage("--model or --config is required".into()))?;
            SimConfig::new(&model, &[], &[], &[])
        }
    };
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if a.q.is_some() {
        cfg.q = a.q;
    }
    if !a.theta0.is_empty() {
        cfg.theta0 = a.theta0;
    }
    if !a.n.is_empty() {
        cfg.n = a.n;
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods;
    }
    if !a.alphas.is_empty() {
        cfg.alphas = a.alphas;
    }
    if !a.levels.is_empty() {
        cfg.levels = a.levels;
    }
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.theta0.is_empty() || cfg.n.is_empty() || cfg.methods.is_empty() {
        return Err(Failure::Usage(
            "--theta0, --n and --methods must be non-empty".into(),
        ));
    }
    cfg.validate()?;
    let rows = with_pool(a.jobs, || simharness::run(&cfg, Metrics::ALL))??;
    let mut w = output(&a.out)?;
    simharness::write_csv(&mut w, &header("simulate", &cfg), &rows)?;
    w.flush()?;
    Ok(())
}

fn delta(a: DeltaArgs) -> Outcome {
    let model = Model::parse(&a.model, a.q)?;
    let dge: Dge = a.dge.parse()?;
    let route = match a.route {
        RouteArg::Analytic => Route::Analytic,
        RouteArg::Fd => Route::FiniteDifference,
    };
    let report = matching::match_report(
        &model,
        &dge,
        a.theta0,
        ATerms { a0: a.a0, a1: a.a1 },
        a.alpha,
        route,
    )?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Failure::Run(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn contour(a: ContourArgs) -> Outcome {
    let base: Option<ContourConfig> = a.config.as_deref().map(read_config).transpose()?;
    let missing = || Failure::Usage("--mu-range and --q-range (or --config) are required".into());
    let cfg = ContourConfig {
        mu_range: a
            .mu_range
            .or(base.as_ref().map(|c| c.mu_range))
            .ok_or_else(missing)?
            .checked()
            .map_err(Failure::Usage)?,
        q_range: a
            .q_range
            .or(base.as_ref().map(|c| c.q_range))
            .ok_or_else(missing)?
            .checked()
            .map_err(Failure::Usage)?,
    };
    let (mu, q) = (cfg.mu_range.grid(), cfg.q_range.grid());
    let grid = with_pool(a.jobs, || matching::delta2_contour(&mu, &q))?;
    let mut w = output(&a.out)?;
    matching::write_contour_csv(&mut w, &header("contour", &cfg), &grid)?;
    w.flush()?;
    Ok(())
}

fn exactness(a: ExactnessArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => read_config(p)?,
        None => ExactnessConfig {
            reps: default_reps(),
            seed: 0,
            n: default_exact_n(),
        },
    };
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if !a.n.is_empty() {
        cfg.n = a.n;
    }
    if cfg.reps == 0 || cfg.n.is_empty() || cfg.n.iter().any(|&n| n < 2) {
        return Err(Failure::Usage(
            "reps must be positive and every n at least 2".into(),
        ));
    }
    let report = with_pool(a.jobs, || {
        simharness::exactness_suite(&cfg.n, &DEFAULT_ALPHAS, cfg.reps, cfg.seed)
    })??;
    let mut w = output(&a.out)?;
    simharness::write_csv(&mut w, &header("exactness", &cfg), &report.rows)?;
    w.flush()?;
    drop(w);
    let failing: Vec<_> = report.cells.iter().filter(|c| !c.pass).collect();
    let summary = format!(
        "{}: {} cells checked, {} outside 4 binomial SE",
        if report.pass { "PASS" } else { "FAIL" },
        report.cells.len(),
        failing.len()
    );
    for c in &failing {
        eprintln!(
            "  {} {} n={} p={}: {:.4} (tolerance {:.4})",
            c.model, c.method, c.n, c.alpha, c.value, c.tolerance
        );
    }
    if report.pass {
        eprintln!("{summary}");
        Ok(())
    } else {
        Err(Failure::Run(summary))
    }
}

fn parse_data(model: &Model, data: &str) -> Result<Sample, Failure> {
    let bad = |t: &str| Failure::Usage(format!("bad observation '{t}'"));
    let obs = data
        .split(',')
        .map(|t| {
            let t = t.trim();
            match t.split_once(':') {
                Some((x, y)) => Ok(Obs::Pair(
                    x.parse().map_err(|_| bad(t))?,
                    y.parse().map_err(|_| bad(t))?,
                )),
                None => Ok(Obs::Scalar(t.parse().map_err(|_| bad(t))?)),
            }
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let s = Sample::new(obs)?;
    model.check_sample(&s)?;
    Ok(s)
}

fn density_dump(a: DumpArgs) -> Outcome {
    let base: Option<DumpConfig> = a.config.as_deref().map(read_config).transpose()?;
    let required = |flag: Option<String>, from: Option<&String>, name: &str| {
        flag.or(from.cloned())
            .ok_or_else(|| Failure::Usage(format!("--{name} (or --config) is required")))
    };
    let mut cfg = DumpConfig {
        model: required(a.model, base.as_ref().map(|c| &c.model), "model")?,
        q: a.q.or(base.as_ref().and_then(|c| c.q)),
        dge: required(a.dge, base.as_ref().map(|c| &c.dge), "dge")?,
        data: None,
        theta0: None,
        n: a.n
            .or(base.as_ref().map(|c| c.n))
            .unwrap_or_else(default_dump_n),
        seed: a.seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(0),
        points: a
            .points
            .or(base.as_ref().map(|c| c.points))
            .unwrap_or_else(default_points),
    };
    // Flags for the sample source replace the config's source entirely.
    if a.data.is_some() || a.theta0.is_some() {
        (cfg.data, cfg.theta0) = (a.data, a.theta0);
    } else if let Some(b) = base {
        (cfg.data, cfg.theta0) = (b.data, b.theta0);
    }
    let model = Model::parse(&cfg.model, cfg.q)?;
    let dge: Dge = cfg.dge.parse()?;
    let sample = match (&cfg.data, cfg.theta0) {
        (Some(d), None) => parse_data(&model, d)?,
        (None, Some(t)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            model.sample_data(t, cfg.n, &mut rng)?
        }
        _ => {
            return Err(Failure::Usage(
                "exactly one of --data or --theta0 is required".into(),
            ))
        }
    };
    let dens = build_density(model, &dge, &sample, DensityOptions::default())?;
    let mut w = output(&a.out)?;
    let mut comments = header("density-dump", &cfg);
    comments.extend(dens.warnings().iter().map(|m| format!("warning {m}")));
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "theta,pdf,cdf")?;
    for (t, p, c) in dens.dump(cfg.points) {
        writeln!(w, "{t:.16e},{p:.16e},{c:.16e}")?;
    }
    w.flush()?;
    Ok(())
}
