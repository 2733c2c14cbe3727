//! Estimation pipelines for the slope and the intercept.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::{mle_fixed_beta, truncated_profile_loglik, StepDistribution};
use crate::kernel::{bandwidth, KernelConfig, PluginEstimator, DENSITY_RATE, INTERCEPT_RATE, PLUGIN_RATE};
use crate::kernel::{DEFAULT_C_DENSITY, DEFAULT_C_INTERCEPT, DEFAULT_C_PLUGIN};
use crate::model::{Sample, TruncationSpec};
use crate::score::{find_root_brent, find_zero_crossing, psi1, psi2, psi3, CrossingResult, NearestScan, SolverMethod};

pub const DEFAULT_INTERVAL: (f64, f64) = (0.3, 0.7);
pub const DEFAULT_GRID_POINTS: usize = 100;
pub const DEFAULT_REFINE_TOL: f64 = 1e-6;
/// Trapezoid points for the plug-in intercept.
pub const INTERCEPT_GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Score1,
    Score2,
    Plugin,
    #[serde(rename = "profile")]
    ProfileMLE,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Score1, Method::Score2, Method::Plugin, Method::ProfileMLE];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Score1 => "score1",
            Method::Score2 => "score2",
            Method::Plugin => "plugin",
            Method::ProfileMLE => "profile",
        }
    }

    /// Default bandwidth constant for the slope; `None` when no smoothing is used.
    pub fn default_c(self) -> Option<f64> {
        match self {
            Method::Score2 => Some(DEFAULT_C_DENSITY),
            Method::Plugin => Some(DEFAULT_C_PLUGIN),
            Method::Score1 | Method::ProfileMLE => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "score1" => Ok(Method::Score1),
            "score2" => Ok(Method::Score2),
            "plugin" => Ok(Method::Plugin),
            "profile" | "mle" => Ok(Method::ProfileMLE),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Outcome of the profile-likelihood grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub grid_points: usize,
    pub max_loglik: f64,
    /// grid points attaining the maximum
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostics {
    Crossing(CrossingResult),
    Grid(GridReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub beta_hat: Vec<f64>,
    pub alpha_hat: Option<f64>,
    /// why the intercept is missing, when it was requested but failed
    pub alpha_failure: Option<String>,
    pub method: Method,
    pub eps: f64,
    pub h_beta: Option<f64>,
    pub h_alpha: Option<f64>,
    pub diagnostics: Diagnostics,
    pub seed: Option<u64>,
}

impl EstimateResult {
    fn new(beta_hat: f64, method: Method, trunc: TruncationSpec, h_beta: Option<f64>, diagnostics: Diagnostics) -> Self {
        Self {
            beta_hat: vec![beta_hat],
            alpha_hat: None,
            alpha_failure: None,
            method,
            eps: trunc.eps(),
            h_beta,
            h_alpha: None,
            diagnostics,
            seed: None,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta_hat[0]
    }
}

fn require_k1(sample: &Sample) -> Result<()> {
    if sample.k() != 1 {
        return Err(Error::Unsupported(format!("estimation is implemented for k = 1, sample has k = {}", sample.k())));
    }
    Ok(())
}

fn require_interval(interval: (f64, f64)) -> Result<()> {
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParameter(format!("search interval must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

fn require_c(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth constant must be positive, got {c}")));
    }
    Ok(())
}

fn check_crossing_inputs(sample: &Sample, interval: (f64, f64)) -> Result<()> {
    require_k1(sample)?;
    require_interval(interval)?;
    if sample.is_degenerate() {
        return Err(Error::NoCrossing {
            lo: interval.0,
            hi: interval.1,
            reason: "all censoring indicators are equal".into(),
        });
    }
    Ok(())
}

pub fn estimate_score1(sample: &Sample, interval: (f64, f64), trunc: TruncationSpec) -> Result<EstimateResult> {
    check_crossing_inputs(sample, interval)?;
    let score = |b: f64| psi1(sample, &[b], trunc).expect("k = 1 checked").value[0];
    let cr = find_zero_crossing(score, interval, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL)?;
    Ok(EstimateResult::new(cr.beta_hat, Method::Score1, trunc, None, Diagnostics::Crossing(cr)))
}

/// Zero-crossing of the efficient MLE-based score with density bandwidth
/// `h = c n^{-1/7}`.
pub fn estimate_score2(sample: &Sample, interval: (f64, f64), trunc: TruncationSpec, c: f64) -> Result<EstimateResult> {
    check_crossing_inputs(sample, interval)?;
    require_c(c)?;
    let h = bandwidth(c, sample.n(), DENSITY_RATE);
    let cfg = KernelConfig::new(h)?;
    let score = |b: f64| psi2(sample, &[b], trunc, cfg).expect("k = 1 checked").value[0];
    let cr = find_zero_crossing(score, interval, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL)?;
    Ok(EstimateResult::new(cr.beta_hat, Method::Score2, trunc, Some(h), Diagnostics::Crossing(cr)))
}

/// Root of the plug-in score with `h = c n^{-1/5}`: grid scan for a
/// bracket, then Brent inside the selected cell.
pub fn estimate_plugin(sample: &Sample, interval: (f64, f64), trunc: TruncationSpec, c: f64) -> Result<EstimateResult> {
    check_crossing_inputs(sample, interval)?;
    require_c(c)?;
    let h = bandwidth(c, sample.n(), PLUGIN_RATE);
    let cfg = KernelConfig::new(h)?;
    let score = |b: f64| psi3(sample, &[b], trunc, cfg).expect("k = 1 checked").value[0];
    let cr = plugin_root(score, interval)?;
    Ok(EstimateResult::new(cr.beta_hat, Method::Plugin, trunc, Some(h), Diagnostics::Crossing(cr)))
}

fn plugin_root<F: FnMut(f64) -> f64>(mut score: F, interval: (f64, f64)) -> Result<CrossingResult> {
    let target = 0.5 * (interval.0 + interval.1);
    let scan = NearestScan::run(&mut score, interval, DEFAULT_GRID_POINTS, target)?;
    let picked = if scan.identically_zero() { None } else { scan.pick };
    let Some((i, j)) = picked else {
        let reason = if scan.identically_zero() {
            "plug-in score vanishes identically on the grid"
        } else {
            "plug-in score has constant nonzero sign on the grid"
        };
        return Err(Error::NoCrossing { lo: interval.0, hi: interval.1, reason: reason.into() });
    };
    let cell = (scan.grid[i], scan.grid[j]);
    if scan.values[i] == Some(0.0) {
        return Ok(CrossingResult {
            beta_hat: 0.5 * (cell.0 + cell.1),
            bracket: cell,
            cell,
            evaluations: scan.evaluations,
            crossings: scan.crossings_seen,
            method: SolverMethod::Brent,
        });
    }
    let mut r = find_root_brent(&mut score, cell, DEFAULT_REFINE_TOL)?;
    r.cell = cell;
    r.crossings = scan.crossings_seen;
    r.evaluations += scan.evaluations;
    Ok(r)
}

/// Maximizer of the truncated profile log likelihood over an equispaced
/// grid; among tied maxima the point nearest the interval midpoint wins.
pub fn estimate_profile_mle(
    sample: &Sample,
    interval: (f64, f64),
    trunc: TruncationSpec,
    grid_points: usize,
) -> Result<EstimateResult> {
    require_k1(sample)?;
    let (lo, hi) = interval;
    if grid_points == 0 {
        return Err(Error::InvalidParameter("profile grid needs at least one point".into()));
    }
    if grid_points == 1 {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter(format!("invalid interval [{lo}, {hi}]")));
        }
    } else {
        require_interval(interval)?;
    }
    let mid = 0.5 * (lo + hi);
    let mut curve = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let b = if grid_points == 1 {
            lo
        } else if i + 1 == grid_points {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (grid_points - 1) as f64
        };
        curve.push((b, truncated_profile_loglik(sample, &[b], trunc)?));
    }
    let l = curve.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<f64> = curve.iter().filter(|&&(_, v)| v == l).map(|&(b, _)| b).collect();
    let ties = tied.len();
    let b = tied
        .into_iter()
        .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
        .unwrap_or(mid);
    let report = GridReport { grid_points, max_loglik: l, ties };
    Ok(EstimateResult::new(b, Method::ProfileMLE, trunc, None, Diagnostics::Grid(report)))
}

/// First moment `sum knot * jump` of a step distribution; fails with
/// `MassDeficit` (carrying the partial moment) when the total mass is below one.
pub fn intercept_from_mle(dist: &StepDistribution) -> Result<f64> {
    let partial: f64 = dist.jumps().map(|(k, m)| k * m).sum();
    let mass = dist.total_mass();
    if mass < 1.0 {
        return Err(Error::MassDeficit { partial, mass });
    }
    Ok(partial)
}

/// First moment of the plug-in distribution estimate at `beta_hat` with
/// bandwidth `h = c_alpha n^{-1/3}`, by integration by parts over the
/// residual range: `upper - int F_nh(u) du` (trapezoid rule).
pub fn intercept_from_plugin(sample: &Sample, beta_hat: f64, c_alpha: f64) -> Result<f64> {
    intercept_from_plugin_grid(sample, beta_hat, c_alpha, INTERCEPT_GRID)
}

pub fn intercept_from_plugin_grid(sample: &Sample, beta_hat: f64, c_alpha: f64, points: usize) -> Result<f64> {
    require_k1(sample)?;
    require_c(c_alpha)?;
    if points < 2 {
        return Err(Error::InvalidParameter("trapezoid grid needs at least two points".into()));
    }
    let h = bandwidth(c_alpha, sample.n(), INTERCEPT_RATE);
    let est = PluginEstimator::new(sample, &[beta_hat], KernelConfig::new(h)?)?;
    let u = est.residuals();
    let (lower, upper) = (u[0], u[u.len() - 1]);
    if lower == upper {
        return match est.value(lower) {
            Some(_) => Ok(lower),
            None => Err(Error::AllExcluded),
        };
    }
    let step = (upper - lower) / (points - 1) as f64;
    let raw: Vec<Option<f64>> = (0..points)
        .map(|i| est.value(if i + 1 == points { upper } else { lower + step * i as f64 }))
        .collect();
    let values = fill_nearest(&raw).ok_or(Error::AllExcluded)?;
    let integral = step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[points - 1]));
    Ok(upper - integral)
}

/// Replaces each `None` by the nearest defined value (the left one on ties).
fn fill_nearest(raw: &[Option<f64>]) -> Option<Vec<f64>> {
    let n = raw.len();
    let mut left: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut last = None;
    for (i, v) in raw.iter().enumerate() {
        if let Some(v) = v {
            last = Some((i, *v));
        }
        left[i] = last;
    }
    let mut out = vec![0.0; n];
    let mut next: Option<(usize, f64)> = None;
    for i in (0..n).rev() {
        if let Some(v) = raw[i] {
            next = Some((i, v));
        }
        out[i] = match (left[i], next) {
            (Some((li, lv)), Some((ri, rv))) => {
                if i - li <= ri - i {
                    lv
                } else {
                    rv
                }
            }
            (Some((_, v)), None) | (None, Some((_, v))) => v,
            (None, None) => return None,
        };
    }
    Some(out)
}

/// Everything needed to run one method end to end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub method: Method,
    pub interval: (f64, f64),
    pub trunc: TruncationSpec,
    /// slope bandwidth constant; the method default when `None`
    pub c_beta: Option<f64>,
    pub c_alpha: f64,
    pub grid_points: usize,
    pub intercept: bool,
}

impl EstimateOptions {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            interval: DEFAULT_INTERVAL,
            trunc: TruncationSpec::default(),
            c_beta: None,
            c_alpha: DEFAULT_C_INTERCEPT,
            grid_points: DEFAULT_GRID_POINTS,
            intercept: true,
        }
    }
}

/// Runs the slope estimator and, when requested, the paired intercept:
/// the plug-in slope uses the plug-in intercept, all others the MLE
/// intercept at their slope. A failed intercept is recorded in
/// `alpha_failure` and does not fail the slope.
pub fn estimate(sample: &Sample, opts: &EstimateOptions) -> Result<EstimateResult> {
    let c = opts.c_beta.or(opts.method.default_c());
    let mut res = match opts.method {
        Method::Score1 => estimate_score1(sample, opts.interval, opts.trunc)?,
        Method::Score2 => estimate_score2(sample, opts.interval, opts.trunc, c.expect("score2 has a default"))?,
        Method::Plugin => estimate_plugin(sample, opts.interval, opts.trunc, c.expect("plugin has a default"))?,
        Method::ProfileMLE => estimate_profile_mle(sample, opts.interval, opts.trunc, opts.grid_points)?,
    };
    if opts.intercept {
        let beta = res.beta();
        let alpha = match opts.method {
            Method::Plugin => {
                res.h_alpha = Some(bandwidth(opts.c_alpha, sample.n(), INTERCEPT_RATE));
                intercept_from_plugin(sample, beta, opts.c_alpha)
            }
            _ => mle_fixed_beta(sample, &[beta]).and_then(|f| intercept_from_mle(&f)),
        };
        match alpha {
            Ok(a) => res.alpha_hat = Some(a),
            Err(e) if e.is_estimation_failure() => res.alpha_failure = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, ModelSpec, Observation};

    #[test]
    fn intercept_from_mle_examples() {
        let f = StepDistribution::new(vec![0.4, 0.6], vec![0.5, 1.0]).unwrap();
        assert!((intercept_from_mle(&f).unwrap() - 0.5).abs() < 1e-15);
        let f = StepDistribution::new(vec![0.37], vec![1.0]).unwrap();
        assert_eq!(intercept_from_mle(&f).unwrap(), 0.37);
        let f = StepDistribution::new(vec![0.4, 0.6], vec![0.5, 0.75]).unwrap();
        match intercept_from_mle(&f) {
            Err(Error::MassDeficit { partial, mass }) => {
                assert!((partial - (0.2 + 0.15)).abs() < 1e-15);
                assert_eq!(mass, 0.75);
            }
            other => panic!("expected MassDeficit, got {other:?}"),
        }
    }

    #[test]
    fn plugin_intercept_of_a_step_at_half() {
        // residuals t on a fine grid (x = 0), delta = 1{t >= 0.5}
        let obs: Vec<Observation> = (0..=400)
            .map(|i| {
                let t = i as f64 / 400.0;
                Observation::new(t, vec![0.0], t >= 0.5)
            })
            .collect();
        let s = Sample::new(obs).unwrap();
        let a = intercept_from_plugin(&s, 0.3, 0.01).unwrap();
        assert!((a - 0.5).abs() < 2e-3, "{a}");
    }

    #[test]
    fn plugin_intercept_all_excluded_is_impossible_on_data_range() {
        // the endpoints are data points, so at least they are defined
        let s = Sample::new(vec![Observation::new(0.0, vec![0.0], false), Observation::new(10.0, vec![0.0], true)]).unwrap();
        let a = intercept_from_plugin(&s, 0.0, 0.01).unwrap();
        // nearest fill: F = 0 on the left half, 1 on the right half
        assert!((a - 5.0).abs() < 0.02, "{a}");
    }

    #[test]
    fn fill_nearest_prefers_left_on_ties() {
        assert_eq!(fill_nearest(&[None, Some(1.0), None, Some(3.0), None]).unwrap(), vec![1.0, 1.0, 1.0, 3.0, 3.0]);
        assert_eq!(fill_nearest(&[None, None]), None);
    }

    #[test]
    fn degenerate_sample_has_no_crossing() {
        let s = Sample::new((0..10).map(|i| Observation::new(i as f64, vec![1.0], true)).collect()).unwrap();
        let t = TruncationSpec::default();
        assert!(matches!(estimate_score1(&s, (0.3, 0.7), t), Err(Error::NoCrossing { .. })));
        assert!(matches!(estimate_score2(&s, (0.3, 0.7), t, 0.5), Err(Error::NoCrossing { .. })));
        assert!(matches!(estimate_plugin(&s, (0.3, 0.7), t, 0.5), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn profile_single_point_grid() {
        let s = simulate(&ModelSpec::standard(), 50, 3).unwrap();
        let r = estimate_profile_mle(&s, (0.42, 0.42), TruncationSpec::default(), 1).unwrap();
        assert_eq!(r.beta(), 0.42);
    }

    #[test]
    fn multidimensional_samples_are_rejected() {
        let s = Sample::new(vec![Observation::new(0.0, vec![0.0, 1.0], false), Observation::new(1.0, vec![1.0, 0.0], true)]).unwrap();
        assert!(matches!(estimate_score1(&s, (0.3, 0.7), TruncationSpec::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn estimates_are_deterministic_and_inside_interval() {
        let s = simulate(&ModelSpec::standard(), 300, 11).unwrap();
        for m in Method::ALL {
            let opts = EstimateOptions::new(m);
            let a = estimate(&s, &opts).unwrap();
            let b = estimate(&s, &opts).unwrap();
            assert_eq!(a, b);
            assert!(a.beta() >= 0.3 && a.beta() <= 0.7, "{m}: {}", a.beta());
        }
    }

    #[test]
    fn large_density_bandwidth_still_crosses() {
        let s = simulate(&ModelSpec::standard(), 300, 5).unwrap();
        let r = estimate_score2(&s, (0.3, 0.7), TruncationSpec::default(), 10.0).unwrap();
        assert_eq!(r.h_beta, Some(10.0 * 300f64.powf(-1.0 / 7.0)));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("nope".parse::<Method>().is_err());
    }
}
