use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use csreg::estimate::{estimate, EstimateOptions, Method, DEFAULT_GRID_POINTS};
use csreg::experiments::{
    bootstrap_bandwidth, default_c_grid, mc_mse_curve, run_montecarlo, BootstrapConfig, MCConfig, MseCurveConfig,
};
use csreg::io::{self as csio, SCHEMA_VERSION};
use csreg::kernel::{bandwidth, KernelConfig, DENSITY_RATE, PLUGIN_RATE};
use csreg::model::simulate;
use csreg::oracle::{population_report, Quantity};
use csreg::score::{psi1, psi2, psi3, GridScan};
use csreg::{mle_fixed_beta, Error, ModelSpec, Sample, TruncationSpec};

#[derive(Parser)]
#[command(name = "csreg", version, about = "Linear regression with current status data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from the uniform simulation design.
    Simulate(SimulateArgs),
    /// Export the nonparametric MLE of the error distribution at a fixed beta.
    Mle(MleArgs),
    /// Estimate the slope (and intercept) from a sample.
    Estimate(EstimateArgs),
    /// Evaluate a score function on a beta grid.
    ScoreCurve(ScoreCurveArgs),
    /// Population quantities of the simulation model.
    Oracle(OracleArgs),
    /// Monte Carlo table of means and n times variances.
    McTable(McTableArgs),
    /// Monte Carlo MSE of the plug-in estimator over bandwidth constants.
    MseCurve(MseCurveArgs),
    /// Bootstrap selection of the plug-in bandwidth constant.
    BootstrapBw(BootstrapArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// true slope of the simulation design
    #[arg(long, default_value_t = 0.5)]
    beta0: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<ModelSpec, Error> {
        if !self.beta0.is_finite() {
            return Err(Error::InvalidParameter("beta0 must be finite".into()));
        }
        Ok(ModelSpec::with_beta0(self.beta0))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// output file (.csv or .json); stdout CSV when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct MleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleSource {
    /// sample file (.csv or .json)
    #[arg(long)]
    input: Option<PathBuf>,
    /// simulate a sample of this size when no input is given
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
}

impl SampleSource {
    fn load(&self) -> Result<Sample, Error> {
        match (&self.input, self.n) {
            (Some(p), _) => csio::read_sample(p),
            (None, Some(n)) => simulate(&self.model.model()?, n, self.seed),
            (None, None) => Err(Error::InvalidParameter("either --input or --n is required".into())),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, default_value = "score1")]
    method: String,
    #[command(flatten)]
    source: SampleSource,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    /// slope bandwidth constant (score2, plugin)
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.75)]
    c_alpha: f64,
    #[arg(long, default_value = "0.3,0.7")]
    interval: String,
    /// profile likelihood grid size
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid: usize,
    #[arg(long)]
    no_intercept: bool,
}

#[derive(Args)]
struct ScoreCurveArgs {
    #[arg(long, default_value = "score1")]
    method: String,
    #[command(flatten)]
    source: SampleSource,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value = "0.45,0.55")]
    interval: String,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    quantity: String,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    /// beta for popscore and ident
    #[arg(long)]
    beta: Option<f64>,
    /// use the simple score variance in interceptvar
    #[arg(long)]
    simple: bool,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct McTableArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "reps", alias = "N")]
    reps: usize,
    /// comma-separated subset of score1,score2,plugin,profile
    #[arg(long, default_value = "score1,score2,plugin,profile")]
    methods: String,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.75)]
    c_alpha: f64,
    #[arg(long, default_value = "0.3,0.7")]
    interval: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct MseCurveArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "reps", alias = "N")]
    reps: usize,
    /// comma-separated bandwidth constants; the default grid when omitted
    #[arg(long)]
    c_grid: Option<String>,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    #[arg(long, default_value = "0.3,0.7")]
    interval: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    source: SampleSource,
    #[arg(long, default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 0.25)]
    c0: f64,
    #[arg(long)]
    c_grid: Option<String>,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    #[arg(long, default_value = "0.3,0.7")]
    interval: String,
    /// seed of the bootstrap resamples
    #[arg(long, default_value_t = 1)]
    boot_seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// write the MSE curve here as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_interval(s: &str) -> Result<(f64, f64), Error> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::InvalidParameter(format!("interval must be 'lo,hi' with lo < hi, got '{s}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("not a number: '{p}'"))))
        .collect()
}

fn trunc(eps: f64) -> Result<TruncationSpec, Error> {
    TruncationSpec::new(eps)
}

fn require_positive(name: &str, v: usize) -> Result<(), Error> {
    if v == 0 {
        return Err(Error::InvalidParameter(format!("--{name} must be at least 1")));
    }
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), json!(SCHEMA_VERSION));
    }
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(a) => {
            require_positive("n", a.n)?;
            let s = simulate(&a.model.model()?, a.n, a.seed)?;
            match &a.out {
                Some(p) => csio::write_sample(p, &s),
                None => {
                    let mut w = output(None)?;
                    csio::write_sample_csv(&mut w, &s)?;
                    w.flush()?;
                    Ok(())
                }
            }
        }
        Command::Mle(a) => {
            let s = csio::read_sample(&a.input)?;
            let f = mle_fixed_beta(&s, &[a.beta])?;
            let mut w = output(a.out.as_deref())?;
            csio::write_step_csv(&mut w, &f)?;
            w.flush()?;
            Ok(())
        }
        Command::Estimate(a) => {
            let method: Method = a.method.parse()?;
            let mut opts = EstimateOptions::new(method);
            opts.trunc = trunc(a.eps)?;
            opts.interval = parse_interval(&a.interval)?;
            opts.c_beta = a.c;
            opts.c_alpha = a.c_alpha;
            opts.grid_points = a.grid;
            opts.intercept = !a.no_intercept;
            let sample = a.source.load()?;
            let mut res = estimate(&sample, &opts)?;
            if a.source.input.is_none() {
                res.seed = Some(a.source.seed);
            }
            print_json(&res)
        }
        Command::ScoreCurve(a) => score_curve(a),
        Command::Oracle(a) => {
            let q: Quantity = a.quantity.parse()?;
            let t = trunc(a.eps)?;
            let r = population_report(&a.model.model()?, q, t, a.beta, !a.simple)?;
            print_json(&json!({
                "quantity": r.quantity,
                "value": r.value,
                "eps": r.eps,
                "beta": r.beta,
                "tol": r.quadrature_tol,
            }))
        }
        Command::McTable(a) => {
            let mut cfg = MCConfig::new(a.n, a.reps);
            cfg.methods = a.methods.split(',').map(|m| m.trim().parse()).collect::<Result<_, _>>()?;
            cfg.trunc = trunc(a.eps)?;
            cfg.c_beta = a.c;
            cfg.c_alpha = a.c_alpha;
            cfg.interval = parse_interval(&a.interval)?;
            cfg.master_seed = a.seed;
            cfg.parallelism = a.jobs;
            cfg.intercept = !a.no_intercept;
            let table = run_montecarlo(&a.model.model()?, &cfg)?;
            let mut w = output(a.out.as_deref())?;
            csio::write_rows(&mut w, &table.rows)?;
            w.flush()?;
            Ok(())
        }
        Command::MseCurve(a) => {
            let mut cfg = MseCurveConfig::new(a.n, a.reps);
            if let Some(g) = &a.c_grid {
                cfg.c_grid = parse_list(g)?;
            }
            cfg.trunc = trunc(a.eps)?;
            cfg.interval = parse_interval(&a.interval)?;
            cfg.master_seed = a.seed;
            cfg.parallelism = a.jobs;
            let curve = mc_mse_curve(&a.model.model()?, &cfg)?;
            let mut w = output(a.out.as_deref())?;
            csio::write_rows(&mut w, &curve)?;
            w.flush()?;
            Ok(())
        }
        Command::BootstrapBw(a) => {
            let mut cfg = BootstrapConfig::new(a.b, a.boot_seed);
            cfg.c_grid = match &a.c_grid {
                Some(g) => parse_list(g)?,
                None => default_c_grid(),
            };
            cfg.c0 = a.c0;
            cfg.interval = parse_interval(&a.interval)?;
            cfg.parallelism = a.jobs;
            let t = trunc(a.eps)?;
            let sample = a.source.load()?;
            let r = bootstrap_bandwidth(&sample, &cfg, t)?;
            if let Some(p) = &a.out {
                let mut w = output(Some(p))?;
                csio::write_rows(&mut w, &r.curve)?;
                w.flush()?;
            }
            print_json(&r)
        }
    }
}

#[derive(Serialize)]
struct CurveRow {
    beta: f64,
    psi: f64,
    method: Method,
    n_used: usize,
    n_excluded: usize,
}

fn score_curve(a: ScoreCurveArgs) -> Result<(), Error> {
    let method: Method = a.method.parse()?;
    let t = trunc(a.eps)?;
    let interval = parse_interval(&a.interval)?;
    require_positive("grid", a.grid)?;
    let sample = a.source.load()?;
    let n = sample.n();
    let c = a.c.or(method.default_c());
    let cfg = match method {
        Method::Score2 => Some(KernelConfig::new(bandwidth(c.unwrap_or_default(), n, DENSITY_RATE))?),
        Method::Plugin => Some(KernelConfig::new(bandwidth(c.unwrap_or_default(), n, PLUGIN_RATE))?),
        Method::Score1 => None,
        Method::ProfileMLE => {
            return Err(Error::InvalidParameter("score-curve supports score1, score2 and plugin".into()));
        }
    };
    // the grid points are the same as in the estimators' scans
    let grid = GridScan::run(|_| 1.0, interval, a.grid.max(2))?.grid;
    let mut rows = Vec::with_capacity(grid.len());
    for b in grid {
        let v = match (method, cfg) {
            (Method::Score2, Some(cfg)) => psi2(&sample, &[b], t, cfg)?,
            (Method::Plugin, Some(cfg)) => psi3(&sample, &[b], t, cfg)?,
            _ => psi1(&sample, &[b], t)?,
        };
        rows.push(CurveRow { beta: b, psi: v.value[0], method, n_used: v.n_used, n_excluded: v.n_excluded });
    }
    let mut w = output(a.out.as_deref())?;
    csio::write_rows(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_estimation_failure() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
