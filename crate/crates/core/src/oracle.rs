//! Population quantities of a known model computed by quadrature:
//! information bounds, the asymptotic variance of the simple score
//! estimator, the intercept variance, the population score and the
//! identifiability integral.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    conditional_expectation, conditional_x_interval, f_beta, kink_points, residual_density, residual_support,
    residual_order, ModelSpec, Sample, TruncationSpec,
};
use crate::quadrature::integrate_refined;

/// Absolute tolerance for the information-type integrals.
pub const INFORMATION_TOL: f64 = 1e-4;
/// Absolute tolerance for the population score and identifiability integral.
pub const SCORE_TOL: f64 = 1e-6;
const INNER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// parametric Fisher information
    Ip,
    /// semiparametric information without truncation
    I,
    /// truncated semiparametric information
    Ieps,
    /// asymptotic variance of the simple score estimator
    Score1Var,
    /// asymptotic variance of the intercept
    InterceptVar,
    /// population version of the simple score at a given beta
    PopScore,
    /// identifiability integral at a given beta
    Ident,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Ip => "ip",
            Quantity::I => "i",
            Quantity::Ieps => "ieps",
            Quantity::Score1Var => "score1var",
            Quantity::InterceptVar => "interceptvar",
            Quantity::PopScore => "popscore",
            Quantity::Ident => "ident",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ip" => Quantity::Ip,
            "i" => Quantity::I,
            "ieps" => Quantity::Ieps,
            "score1var" => Quantity::Score1Var,
            "interceptvar" => Quantity::InterceptVar,
            "popscore" => Quantity::PopScore,
            "ident" => Quantity::Ident,
            other => return Err(Error::InvalidParameter(format!("unknown quantity '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationReport {
    pub quantity: Quantity,
    pub value: f64,
    pub eps: f64,
    pub beta: Option<f64>,
    pub quadrature_tol: f64,
}

/// Uniform conditional law of `X` given `T - beta X = u`: (mean, variance).
fn conditional_moments(model: &ModelSpec, beta: f64, u: f64) -> Option<(f64, f64)> {
    let (lo, hi) = conditional_x_interval(model, beta, u)?;
    Some((0.5 * (lo + hi), (hi - lo) * (hi - lo) / 12.0))
}

/// `[u_lo, u_hi]` with `F0(u) in [eps, 1 - eps]`, endpoints by bisection.
pub fn truncation_region(model: &ModelSpec, trunc: TruncationSpec) -> (f64, f64) {
    let (el, eh) = model.error.support();
    let eps = trunc.eps();
    if eps == 0.0 {
        return (el, eh);
    }
    (model.error.quantile(eps), model.error.quantile(1.0 - eps))
}

/// Integral over the truncation region at the true parameter of
/// `g(u, E(X|u), Var(X|u)) f_U(u)`.
fn integrate_at_truth<G>(model: &ModelSpec, trunc: TruncationSpec, tol: f64, mut g: G) -> Result<f64>
where
    G: FnMut(f64, f64, f64) -> f64,
{
    let b0 = model.require_scalar()?;
    let (a, b) = truncation_region(model, trunc);
    let kinks = kink_points(model, b0);
    let q = integrate_refined(
        |u| match conditional_moments(model, b0, u) {
            Some((m, v)) => {
                let fu = residual_density(model, b0, u).unwrap_or(0.0);
                g(u, m, v) * fu
            }
            None => 0.0,
        },
        a,
        b,
        &kinks,
        tol,
    )?;
    Ok(q.value)
}

/// `f0(u)^2 / [F0(u){1 - F0(u)}]`, zero where `F0` is 0 or 1.
fn information_weight(model: &ModelSpec, u: f64) -> f64 {
    let f = model.error.density(u);
    let p = model.error.cdf(u);
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        f * f / (p * (1.0 - p))
    }
}

/// Parametric Fisher information for beta with the error law known.
pub fn fisher_parametric(model: &ModelSpec) -> Result<f64> {
    fisher_parametric_truncated(model, TruncationSpec::none())
}

pub fn fisher_parametric_truncated(model: &ModelSpec, trunc: TruncationSpec) -> Result<f64> {
    integrate_at_truth(model, trunc, INFORMATION_TOL, |u, m, v| (v + m * m) * information_weight(model, u))
}

/// Efficient information `I_eps(beta0)`; `TruncationSpec::none()` gives
/// the untruncated bound.
pub fn fisher_semiparametric(model: &ModelSpec, trunc: TruncationSpec) -> Result<f64> {
    integrate_at_truth(model, trunc, INFORMATION_TOL, |u, _, v| v * information_weight(model, u))
}

/// `(A, B)` of the simple score's sandwich variance.
pub fn score1_sandwich(model: &ModelSpec, trunc: TruncationSpec) -> Result<(f64, f64)> {
    let a = integrate_at_truth(model, trunc, INFORMATION_TOL * 1e-2, |u, _, v| model.error.density(u) * v)?;
    let b = integrate_at_truth(model, trunc, INFORMATION_TOL * 1e-2, |u, _, v| {
        let p = model.error.cdf(u);
        p * (1.0 - p) * v
    })?;
    Ok((a, b))
}

/// `A^{-1} B A^{-1}`.
pub fn score1_asymptotic_variance(model: &ModelSpec, trunc: TruncationSpec) -> Result<f64> {
    let (a, b) = score1_sandwich(model, trunc)?;
    if a.abs() < 1e-12 {
        return Err(Error::SingularA(a));
    }
    Ok(b / (a * a))
}

/// Asymptotic variance of the intercept estimator: `a^2 V + int F0(1 - F0) / f_U`
/// where `V` is the slope variance (efficient bound or the simple score
/// sandwich) and `a = int E(X|u) dF0(u)`. Both `a` and the second summand
/// are integrated over the whole error support.
pub fn intercept_variance(model: &ModelSpec, trunc: TruncationSpec, efficient: bool) -> Result<f64> {
    let b0 = model.require_scalar()?;
    let v = if efficient {
        1.0 / fisher_semiparametric(model, trunc)?
    } else {
        score1_asymptotic_variance(model, trunc)?
    };
    let (el, eh) = model.error.support();
    let kinks = kink_points(model, b0);
    let a = integrate_refined(
        |u| conditional_moments(model, b0, u).map_or(0.0, |(m, _)| m * model.error.density(u)),
        el,
        eh,
        &kinks,
        INFORMATION_TOL * 1e-2,
    )?
    .value;
    let mut missing = None;
    let second = integrate_refined(
        |u| {
            let p = model.error.cdf(u);
            match residual_density(model, b0, u) {
                Ok(fu) if fu > 0.0 => p * (1.0 - p) / fu,
                _ => {
                    if p > 0.0 && p < 1.0 {
                        missing = Some(u);
                    }
                    0.0
                }
            }
        },
        el,
        eh,
        &kinks,
        INFORMATION_TOL * 1e-2,
    )?
    .value;
    if let Some(u) = missing {
        return Err(Error::ZeroDensity(u));
    }
    Ok(a * a * v + second)
}

/// `Cov(X, F0(u + (beta - beta0) X) | T - beta X = u)`.
fn conditional_cov(model: &ModelSpec, beta: f64, u: f64) -> Result<f64> {
    let d = beta - model.beta0[0];
    let Some((m, _)) = conditional_moments(model, beta, u) else {
        return Ok(0.0);
    };
    if d == 0.0 {
        return Ok(0.0);
    }
    conditional_expectation(model, beta, u, INNER_TOL, |x| (x - m) * model.error.cdf(u + d * x))
}

/// Integral over `{u : F_beta(u) in [eps, 1 - eps]}` of `g(u, F_beta(u)) f_{U_beta}(u)`;
/// the region endpoints are located by bisection and used as breakpoints.
fn integrate_over_beta_region<G>(model: &ModelSpec, beta: f64, trunc: TruncationSpec, mut g: G) -> Result<f64>
where
    G: FnMut(f64, f64) -> Result<f64>,
{
    model.require_scalar()?;
    let (lo, hi) = residual_support(model, beta);
    let mut cuts = kink_points(model, beta);
    let fb = |u: f64| f_beta(model, beta, u).unwrap_or(if u < 0.5 * (lo + hi) { 0.0 } else { 1.0 });
    for level in [trunc.eps(), 1.0 - trunc.eps()] {
        if let Some(c) = level_crossing(fb, lo, hi, level) {
            cuts.push(c);
        }
    }
    let mut failure = None;
    let q = integrate_refined(
        |u| {
            let fu = match residual_density(model, beta, u) {
                Ok(v) if v > 0.0 => v,
                _ => return 0.0,
            };
            let p = match f_beta(model, beta, u) {
                Ok(p) => p,
                Err(e) => {
                    failure.get_or_insert(e);
                    return 0.0;
                }
            };
            if !trunc.contains(p) {
                return 0.0;
            }
            match g(u, p) {
                Ok(v) => v * fu,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        lo,
        hi,
        &cuts,
        SCORE_TOL,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.value)
}

/// Smallest `u` in `[a, b]` (to 1e-12) with `f(u) >= level` for non-decreasing `f`.
fn level_crossing<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, level: f64) -> Option<f64> {
    if f(b) < level || f(a) >= level {
        return None;
    }
    let (mut lo, mut hi) = (a, b);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Population simple score `E[X{Delta - F_beta(T - beta X)}]` over the
/// points with `F_beta` in `[eps, 1 - eps]`.
pub fn population_score1(model: &ModelSpec, beta: f64, trunc: TruncationSpec) -> Result<f64> {
    integrate_over_beta_region(model, beta, trunc, |u, _| conditional_cov(model, beta, u))
}

/// `int f0(u) Cov((beta - beta0) X, F0(u + (beta - beta0) X) | u) / [F_beta(u){1 - F_beta(u)}] dG(u)`
/// over `F_beta(u) in [eps, 1 - eps]`, with `G` the law of `T - beta X`.
pub fn identifiability_integral(model: &ModelSpec, beta: f64, trunc: TruncationSpec) -> Result<f64> {
    let d = beta - model.require_scalar()?;
    integrate_over_beta_region(model, beta, trunc, |u, p| {
        if p <= 0.0 || p >= 1.0 {
            return Ok(0.0);
        }
        let f0 = model.error.density(u);
        if f0 == 0.0 {
            return Ok(0.0);
        }
        Ok(f0 * d * conditional_cov(model, beta, u)? / (p * (1.0 - p)))
    })
}

/// Efficient-score summands at the truth; zero outside `F0 in [eps, 1 - eps]`.
pub fn influence_summands(model: &ModelSpec, sample: &Sample, trunc: TruncationSpec) -> Result<Vec<f64>> {
    let b0 = model.require_scalar()?;
    if sample.k() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: sample.k() });
    }
    let order = residual_order(sample, &[b0])?;
    let mut out = vec![0.0; sample.n()];
    for e in order.entries() {
        let p = model.error.cdf(e.u);
        if !trunc.contains(p) || p <= 0.0 || p >= 1.0 {
            continue;
        }
        let (m, _) = conditional_moments(model, b0, e.u).ok_or(Error::ZeroDensity(e.u))?;
        let x = sample.observations()[e.index].x[0];
        let d = if e.delta { 1.0 } else { 0.0 };
        out[e.index] = model.error.density(e.u) * (m - x) * (d - p) / (p * (1.0 - p));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceCheck {
    /// `n^{-1/2} I_eps^{-1} sum_{i in J} summand_i`
    pub representation: f64,
    /// `sqrt(n) (beta_hat - beta0)`
    pub scaled_error: f64,
    pub summand_mean: f64,
    pub n_used: usize,
}

pub fn influence_representation_check(
    model: &ModelSpec,
    sample: &Sample,
    beta_hat: f64,
    trunc: TruncationSpec,
    information: f64,
) -> Result<InfluenceCheck> {
    let s = influence_summands(model, sample, trunc)?;
    let n = sample.n() as f64;
    let n_used = s.iter().filter(|&&v| v != 0.0).count();
    let sum: f64 = s.iter().sum();
    Ok(InfluenceCheck {
        representation: sum / (information * n.sqrt()),
        scaled_error: n.sqrt() * (beta_hat - model.beta0[0]),
        summand_mean: sum / n,
        n_used,
    })
}

/// Dispatches one quantity; `beta` is required for `PopScore` and `Ident`,
/// `efficient` selects the slope variance used by `InterceptVar`.
pub fn population_report(
    model: &ModelSpec,
    quantity: Quantity,
    trunc: TruncationSpec,
    beta: Option<f64>,
    efficient: bool,
) -> Result<PopulationReport> {
    let need_beta = || beta.ok_or_else(|| Error::InvalidParameter(format!("quantity {quantity} needs a beta value")));
    let (value, eps, tol) = match quantity {
        Quantity::Ip => (fisher_parametric(model)?, 0.0, INFORMATION_TOL),
        Quantity::I => (fisher_semiparametric(model, TruncationSpec::none())?, 0.0, INFORMATION_TOL),
        Quantity::Ieps => (fisher_semiparametric(model, trunc)?, trunc.eps(), INFORMATION_TOL),
        Quantity::Score1Var => (score1_asymptotic_variance(model, trunc)?, trunc.eps(), INFORMATION_TOL),
        Quantity::InterceptVar => (intercept_variance(model, trunc, efficient)?, trunc.eps(), INFORMATION_TOL),
        Quantity::PopScore => (population_score1(model, need_beta()?, trunc)?, trunc.eps(), SCORE_TOL),
        Quantity::Ident => (identifiability_integral(model, need_beta()?, trunc)?, trunc.eps(), SCORE_TOL),
    };
    let beta = matches!(quantity, Quantity::PopScore | Quantity::Ident).then_some(beta).flatten();
    Ok(PopulationReport { quantity, value, eps, beta, quadrature_tol: tol })
}
