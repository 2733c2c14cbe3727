//! Monte Carlo tables, Monte Carlo MSE curves over bandwidth constants and
//! bootstrap bandwidth selection for the plug-in estimator.
//!
//! Every replication draws from its own seed `derive_seed(master, j)` and
//! results are reduced in replication order, so output does not depend on
//! the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{estimate, estimate_plugin, EstimateOptions, Method, DEFAULT_INTERVAL};
use crate::kernel::{bandwidth, KernelConfig, PluginEstimator, DEFAULT_C_INTERCEPT, PLUGIN_RATE};
use crate::model::{derive_seed, simulate, ModelSpec, Sample, TruncationSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct MCConfig {
    pub n: usize,
    pub n_reps: usize,
    pub methods: Vec<Method>,
    pub trunc: TruncationSpec,
    /// slope bandwidth constant; each method's default when `None`
    pub c_beta: Option<f64>,
    pub c_alpha: f64,
    pub interval: (f64, f64),
    pub master_seed: u64,
    pub parallelism: usize,
    pub intercept: bool,
}

impl MCConfig {
    pub fn new(n: usize, n_reps: usize) -> Self {
        Self {
            n,
            n_reps,
            methods: Method::ALL.to_vec(),
            trunc: TruncationSpec::default(),
            c_beta: None,
            c_alpha: DEFAULT_C_INTERCEPT,
            interval: DEFAULT_INTERVAL,
            master_seed: 1,
            parallelism: 1,
            intercept: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidParameter(format!("Monte Carlo sample size must be at least 10, got {}", self.n)));
        }
        if self.n_reps < 1 {
            return Err(Error::InvalidParameter("need at least one replication".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods selected".into()));
        }
        if self.parallelism < 1 {
            return Err(Error::InvalidParameter("parallelism must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Beta,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCRow {
    pub parameter: Parameter,
    pub method: Method,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_reps: usize,
    pub mean: f64,
    pub n_times_var: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCTable {
    pub rows: Vec<MCRow>,
}

impl MCTable {
    pub fn get(&self, parameter: Parameter, method: Method) -> Option<&MCRow> {
        self.rows.iter().find(|r| r.parameter == parameter && r.method == method)
    }
}

fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))
}

fn run_one(model: &ModelSpec, cfg: &MCConfig, index: usize) -> Result<Replication> {
    let seed = derive_seed(cfg.master_seed, index as u64);
    let sample = simulate(model, cfg.n, seed)?;
    let mut outcomes = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut opts = EstimateOptions::new(method);
        opts.interval = cfg.interval;
        opts.trunc = cfg.trunc;
        opts.c_beta = cfg.c_beta;
        opts.c_alpha = cfg.c_alpha;
        opts.intercept = cfg.intercept;
        outcomes.push(match estimate(&sample, &opts) {
            Ok(r) => MethodOutcome { method, beta: Some(r.beta()), alpha: r.alpha_hat, failure: r.alpha_failure },
            Err(e) if e.is_estimation_failure() => {
                MethodOutcome { method, beta: None, alpha: None, failure: Some(e.to_string()) }
            }
            Err(e) => return Err(e),
        });
    }
    Ok(Replication { index, seed, outcomes })
}

/// All replications with their per-method outcomes, in replication order.
pub fn run_replications(model: &ModelSpec, cfg: &MCConfig) -> Result<Vec<Replication>> {
    cfg.validate()?;
    thread_pool(cfg.parallelism)?.install(|| (0..cfg.n_reps).into_par_iter().map(|j| run_one(model, cfg, j)).collect())
}

/// `(mean, n * variance, failures)` with the variance over successes only.
fn moments(values: &[Option<f64>], n: usize) -> Option<(f64, f64, usize)> {
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    if ok.is_empty() {
        return None;
    }
    let m = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / m;
    let var = ok.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    Some((mean, n as f64 * var, values.len() - ok.len()))
}

/// Reduces replications to the table of means and `n` times variances.
pub fn summarize(reps: &[Replication], cfg: &MCConfig) -> Result<MCTable> {
    let mut rows = Vec::new();
    let params: &[Parameter] = if cfg.intercept { &[Parameter::Beta, Parameter::Alpha] } else { &[Parameter::Beta] };
    for &parameter in params {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let values: Vec<Option<f64>> = reps
                .iter()
                .map(|r| match parameter {
                    Parameter::Beta => r.outcomes[mi].beta,
                    Parameter::Alpha => r.outcomes[mi].alpha,
                })
                .collect();
            let (mean, n_times_var, failures) = moments(&values, cfg.n).ok_or_else(|| {
                Error::AllFailed(format!("every replication failed for {method} ({parameter:?})").to_lowercase())
            })?;
            rows.push(MCRow { parameter, method, n: cfg.n, n_reps: reps.len(), mean, n_times_var, failures });
        }
    }
    Ok(MCTable { rows })
}

pub fn run_montecarlo(model: &ModelSpec, cfg: &MCConfig) -> Result<MCTable> {
    let reps = run_replications(model, cfg)?;
    summarize(&reps, cfg)
}

/// `0.01, 0.05, 0.10, ..., 0.95`.
pub fn default_c_grid() -> Vec<f64> {
    std::iter::once(0.01).chain((1..=19).map(|k| (5 * k) as f64 / 100.0)).collect()
}

fn validate_c_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("bandwidth grid is empty".into()));
    }
    if grid.iter().any(|&c| !(c.is_finite() && c > 0.0)) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("bandwidth grid must be positive and strictly ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    MonteCarlo,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub c: f64,
    /// NaN when every cell at this `c` failed
    pub mse: f64,
    pub kind: CurveKind,
    #[serde(skip)]
    pub failures: usize,
}

fn curve(c_grid: &[f64], deviations: &[Vec<Option<f64>>], kind: CurveKind) -> Vec<CurvePoint> {
    c_grid
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            let ok: Vec<f64> = deviations.iter().filter_map(|row| row[ci]).collect();
            let mse = if ok.is_empty() { f64::NAN } else { ok.iter().map(|d| d * d).sum::<f64>() / ok.len() as f64 };
            CurvePoint { c, mse, kind, failures: deviations.len() - ok.len() }
        })
        .collect()
}

/// Smallest `c` attaining the minimum finite MSE.
pub fn curve_argmin(curve: &[CurvePoint]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for p in curve {
        if p.mse.is_finite() && best.is_none_or(|(_, m)| p.mse < m) {
            best = Some((p.c, p.mse));
        }
    }
    best.map(|(c, _)| c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseCurveConfig {
    pub n: usize,
    pub n_reps: usize,
    pub c_grid: Vec<f64>,
    pub trunc: TruncationSpec,
    pub interval: (f64, f64),
    pub master_seed: u64,
    pub parallelism: usize,
}

impl MseCurveConfig {
    pub fn new(n: usize, n_reps: usize) -> Self {
        Self {
            n,
            n_reps,
            c_grid: default_c_grid(),
            trunc: TruncationSpec::default(),
            interval: DEFAULT_INTERVAL,
            master_seed: 1,
            parallelism: 1,
        }
    }
}

/// Monte Carlo MSE of the plug-in slope estimator for each `c`, with
/// bandwidth `c n^{-1/5}`.
pub fn mc_mse_curve(model: &ModelSpec, cfg: &MseCurveConfig) -> Result<Vec<CurvePoint>> {
    validate_c_grid(&cfg.c_grid)?;
    if cfg.n < 10 || cfg.n_reps < 1 || cfg.parallelism < 1 {
        return Err(Error::InvalidParameter("need n >= 10, N >= 1 and at least one worker".into()));
    }
    let b0 = model.require_scalar()?;
    let rows: Vec<Vec<Option<f64>>> = thread_pool(cfg.parallelism)?.install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|j| {
                let sample = simulate(model, cfg.n, derive_seed(cfg.master_seed, j as u64))?;
                cfg.c_grid
                    .iter()
                    .map(|&c| match estimate_plugin(&sample, cfg.interval, cfg.trunc, c) {
                        Ok(r) => Ok(Some(r.beta() - b0)),
                        Err(e) if e.is_estimation_failure() => Ok(None),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(curve(&cfg.c_grid, &rows, CurveKind::MonteCarlo))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub c_grid: Vec<f64>,
    pub c0: f64,
    pub b: usize,
    pub seed: u64,
    pub interval: (f64, f64),
    pub parallelism: usize,
}

impl BootstrapConfig {
    pub fn new(b: usize, seed: u64) -> Self {
        Self { c_grid: default_c_grid(), c0: 0.25, b, seed, interval: DEFAULT_INTERVAL, parallelism: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub c_opt: f64,
    pub h_opt: f64,
    /// plug-in estimate at the initial bandwidth
    pub beta_c0: f64,
    pub h0: f64,
    pub curve: Vec<CurvePoint>,
}

/// `F_{nh,beta}` at every observation's residual, in row order.
pub fn bootstrap_probabilities(sample: &Sample, beta_hat: f64, h0: f64) -> Result<Vec<f64>> {
    let est = PluginEstimator::new(sample, &[beta_hat], KernelConfig::new(h0)?)?;
    (0..sample.n())
        .map(|row| est.value_at_sorted(est.sorted_position(row)).ok_or(Error::AllExcluded))
        .collect()
}

/// Keeps every `(t, x)` and redraws `delta_i ~ Bernoulli(probs[i])` from the
/// stream of resample `b`.
pub fn bootstrap_resample(sample: &Sample, probs: &[f64], seed: u64, b: usize) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b as u64));
    let deltas: Vec<bool> = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
    sample.with_deltas(&deltas)
}

/// Bootstrap MSE of the plug-in estimator around its value at `c0` for
/// each `c`; the selected constant minimizes that curve (ties to the smaller `c`).
pub fn bootstrap_bandwidth(sample: &Sample, bcfg: &BootstrapConfig, trunc: TruncationSpec) -> Result<BootstrapResult> {
    validate_c_grid(&bcfg.c_grid)?;
    if bcfg.b < 1 || bcfg.parallelism < 1 {
        return Err(Error::InvalidParameter("need B >= 1 and at least one worker".into()));
    }
    if !(bcfg.c0.is_finite() && bcfg.c0 > 0.0) {
        return Err(Error::InvalidParameter(format!("initial bandwidth constant must be positive, got {}", bcfg.c0)));
    }
    let fit = estimate_plugin(sample, bcfg.interval, trunc, bcfg.c0)?;
    let beta0 = fit.beta();
    let h0 = bandwidth(bcfg.c0, sample.n(), PLUGIN_RATE);
    let probs = bootstrap_probabilities(sample, beta0, h0)?;
    let rows: Vec<Vec<Option<f64>>> = thread_pool(bcfg.parallelism)?.install(|| {
        (0..bcfg.b)
            .into_par_iter()
            .map(|b| {
                let star = bootstrap_resample(sample, &probs, bcfg.seed, b)?;
                bcfg.c_grid
                    .iter()
                    .map(|&c| match estimate_plugin(&star, bcfg.interval, trunc, c) {
                        Ok(r) => Ok(Some(r.beta() - beta0)),
                        Err(e) if e.is_estimation_failure() => Ok(None),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let curve = curve(&bcfg.c_grid, &rows, CurveKind::Bootstrap);
    let c_opt = curve_argmin(&curve).ok_or_else(|| Error::AllFailed("every bootstrap cell failed".into()))?;
    Ok(BootstrapResult { c_opt, h_opt: bandwidth(c_opt, sample.n(), PLUGIN_RATE), beta_c0: beta0, h0, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_matches_layout() {
        let g = default_c_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[1], 0.05);
        assert_eq!(g[2], 0.1);
        assert_eq!(g[19], 0.95);
    }

    #[test]
    fn single_replication_has_zero_variance() {
        let mut cfg = MCConfig::new(200, 1);
        cfg.methods = vec![Method::Score1, Method::Plugin];
        let t = run_montecarlo(&ModelSpec::standard(), &cfg).unwrap();
        assert_eq!(t.rows.len(), 4);
        for r in &t.rows {
            assert_eq!(r.n_times_var, 0.0);
            assert_eq!(r.failures, 0);
        }
    }

    #[test]
    fn moments_exclude_failures() {
        let (mean, ntv, fail) = moments(&[Some(1.0), None, Some(3.0)], 10).unwrap();
        assert_eq!((mean, ntv, fail), (2.0, 10.0, 1));
        assert!(moments(&[None, None], 10).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(MCConfig::new(5, 10).validate().is_err());
        assert!(MCConfig::new(50, 0).validate().is_err());
        assert!(validate_c_grid(&[0.2, 0.1]).is_err());
        assert!(validate_c_grid(&[0.0, 0.1]).is_err());
        assert!(validate_c_grid(&[0.1, 0.2]).is_ok());
    }

    #[test]
    fn curve_with_exact_estimate_is_zero() {
        let pts = curve(&[0.5], &[vec![Some(0.0)]], CurveKind::MonteCarlo);
        assert_eq!(pts[0].mse, 0.0);
        let pts = curve(&[0.5, 0.6], &[vec![None, Some(0.1)]], CurveKind::Bootstrap);
        assert!(pts[0].mse.is_nan());
        assert_eq!(pts[0].failures, 1);
        assert_eq!(curve_argmin(&pts), Some(0.6));
    }

    #[test]
    fn argmin_ties_go_to_smaller_c() {
        let pts: Vec<CurvePoint> = [(0.1, 2.0), (0.2, 1.0), (0.3, 1.0)]
            .iter()
            .map(|&(c, mse)| CurvePoint { c, mse, kind: CurveKind::Bootstrap, failures: 0 })
            .collect();
        assert_eq!(curve_argmin(&pts), Some(0.2));
    }

    #[test]
    fn certain_probabilities_fix_the_resample() {
        let s = simulate(&ModelSpec::standard(), 30, 1).unwrap();
        let star = bootstrap_resample(&s, &[1.0; 30], 5, 0).unwrap();
        assert!(star.iter().all(|o| o.delta));
        let star = bootstrap_resample(&s, &[0.0; 30], 5, 0).unwrap();
        assert!(star.iter().all(|o| !o.delta));
    }

    #[test]
    fn resample_keeps_design() {
        let s = simulate(&ModelSpec::standard(), 100, 8).unwrap();
        let p = bootstrap_probabilities(&s, 0.5, 0.2).unwrap();
        let star = bootstrap_resample(&s, &p, 3, 7).unwrap();
        for (a, b) in s.iter().zip(star.iter()) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.x, b.x);
        }
    }
}
