//! Censored samples, residual ordering and the uniform-design simulation
//! model with its closed-form population quantities.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// One current status observation: censoring time `t`, covariates `x` and
/// the indicator `delta = 1{Y <= t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub x: Vec<f64>,
    pub delta: bool,
}

impl Observation {
    pub fn new(t: f64, x: Vec<f64>, delta: bool) -> Self {
        Self { t, x, delta }
    }

    #[inline]
    pub fn delta_f64(&self) -> f64 {
        if self.delta {
            1.0
        } else {
            0.0
        }
    }

    /// Residual `t - beta'x`.
    #[inline]
    pub fn residual(&self, beta: &[f64]) -> f64 {
        self.t - dot(beta, &self.x)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Immutable collection of observations sharing covariate dimension `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    observations: Vec<Observation>,
    k: usize,
}

impl Sample {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| Error::InvalidSample("sample must contain at least one observation".into()))?;
        let k = first.x.len();
        if k == 0 {
            return Err(Error::InvalidSample("covariate dimension must be positive".into()));
        }
        for (i, o) in observations.iter().enumerate() {
            if o.x.len() != k {
                return Err(Error::InvalidSample(format!(
                    "row {i} has {} covariates, expected {k}",
                    o.x.len()
                )));
            }
            if !o.t.is_finite() || o.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!("row {i} has a non-finite value")));
            }
        }
        Ok(Self { observations, k })
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    pub(crate) fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: beta.len() });
        }
        Ok(())
    }

    /// True when every indicator takes the same value.
    pub fn is_degenerate(&self) -> bool {
        let first = self.observations[0].delta;
        self.observations.iter().all(|o| o.delta == first)
    }

    /// Same `(t, x)` rows with new indicators.
    pub fn with_deltas(&self, deltas: &[bool]) -> Result<Self> {
        if deltas.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: deltas.len() });
        }
        let observations = self
            .observations
            .iter()
            .zip(deltas)
            .map(|(o, &d)| Observation { t: o.t, x: o.x.clone(), delta: d })
            .collect();
        Ok(Self { observations, k: self.k })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEntry {
    pub u: f64,
    pub delta: bool,
    pub index: usize,
}

/// Residuals `u_i = t_i - beta'x_i` in ascending order, ties kept in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualOrder {
    entries: Vec<ResidualEntry>,
}

impl ResidualOrder {
    pub fn entries(&self) -> &[ResidualEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_entries_unchecked(entries: Vec<ResidualEntry>) -> Self {
        Self { entries }
    }
}

pub fn residual_order(sample: &Sample, beta: &[f64]) -> Result<ResidualOrder> {
    sample.check_beta(beta)?;
    let mut entries: Vec<ResidualEntry> = sample
        .iter()
        .enumerate()
        .map(|(index, o)| ResidualEntry { u: o.residual(beta), delta: o.delta, index })
        .collect();
    // sort_by is stable, so equal residuals stay in row order
    entries.sort_by(|a, b| a.u.total_cmp(&b.u));
    Ok(ResidualOrder { entries })
}

/// Truncation level `eps`: scores only use points whose distribution
/// estimate lies in `[eps, 1 - eps]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    eps: f64,
}

impl TruncationSpec {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidParameter(format!("truncation eps must lie in (0, 1/2), got {eps}")));
        }
        Ok(Self { eps })
    }

    /// No truncation (`eps = 0`). Points with an estimate of exactly 0 or 1
    /// are still skipped by scores whose weight divides by `F(1 - F)`.
    pub fn none() -> Self {
        Self { eps: 0.0 }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn contains(&self, p: f64) -> bool {
        p >= self.eps && p <= 1.0 - self.eps
    }
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self { eps: 0.001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformLaw {
    pub lo: f64,
    pub hi: f64,
}

impl UniformLaw {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("uniform bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn draw(&self, p: f64) -> f64 {
        self.lo + p * self.width()
    }
}

/// Law of the regression error. Implementors provide the CDF, density and
/// a bounded support; the quantile defaults to bisection.
pub trait ErrorDistribution: fmt::Debug + Send + Sync {
    fn cdf(&self, u: f64) -> f64;
    fn density(&self, u: f64) -> f64;
    fn support(&self) -> (f64, f64);

    /// Inverse CDF by bisection to 1e-12.
    fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.support();
        if p <= 0.0 {
            return lo;
        }
        if p >= 1.0 {
            return hi;
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Rescaled Beta(2, 2) law on `[lower, upper]`: density `6 s (1 - s) / w`
/// with `s = (u - lower) / w`, CDF `s^2 (3 - 2 s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBeta22 {
    pub lower: f64,
    pub upper: f64,
}

impl ScaledBeta22 {
    #[inline]
    fn s(&self, u: f64) -> f64 {
        ((u - self.lower) / (self.upper - self.lower)).clamp(0.0, 1.0)
    }
}

impl ErrorDistribution for ScaledBeta22 {
    fn cdf(&self, u: f64) -> f64 {
        let s = self.s(u);
        s * s * (3.0 - 2.0 * s)
    }

    fn density(&self, u: f64) -> f64 {
        if u < self.lower || u > self.upper {
            return 0.0;
        }
        let w = self.upper - self.lower;
        let s = (u - self.lower) / w;
        6.0 * s * (1.0 - s) / w
    }

    fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }
}

/// Data-generating model: independent uniform `T` and `X` components and an
/// error `eps` independent of `(T, X)`; `Y = beta0'X + eps`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub beta0: Vec<f64>,
    pub t_dist: UniformLaw,
    pub x_dist: Vec<UniformLaw>,
    pub error: Arc<dyn ErrorDistribution>,
}

impl ModelSpec {
    pub fn new(
        beta0: Vec<f64>,
        t_dist: UniformLaw,
        x_dist: Vec<UniformLaw>,
        error: Arc<dyn ErrorDistribution>,
    ) -> Result<Self> {
        if beta0.is_empty() || beta0.len() != x_dist.len() {
            return Err(Error::DimensionMismatch { expected: x_dist.len(), got: beta0.len() });
        }
        Ok(Self { beta0, t_dist, x_dist, error })
    }

    /// `Y = 0.5 X + eps`, `T, X ~ Uniform(0, 2)`, error density
    /// `384 (u - 0.375)(0.625 - u)` on `[0.375, 0.625]`.
    pub fn standard() -> Self {
        Self::with_beta0(0.5)
    }

    /// The same design with a different true slope.
    pub fn with_beta0(beta0: f64) -> Self {
        Self {
            beta0: vec![beta0],
            t_dist: UniformLaw { lo: 0.0, hi: 2.0 },
            x_dist: vec![UniformLaw { lo: 0.0, hi: 2.0 }],
            error: Arc::new(ScaledBeta22 { lower: 0.375, upper: 0.625 }),
        }
    }

    pub fn k(&self) -> usize {
        self.beta0.len()
    }

    pub(crate) fn require_scalar(&self) -> Result<f64> {
        if self.k() != 1 {
            return Err(Error::Unsupported(format!(
                "population quantities are implemented for k = 1, model has k = {}",
                self.k()
            )));
        }
        Ok(self.beta0[0])
    }
}

/// SplitMix64 finalizer; used to derive independent seeds from
/// `(master, index)` pairs.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based stream for observation `index` under `seed`.
pub fn observation_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `n` observations. Observation `i` uses its own stream, so the
/// result does not depend on generation order.
pub fn simulate(model: &ModelSpec, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let observations = (0..n).map(|i| draw_observation(model, seed, i as u64)).collect();
    Sample::new(observations)
}

fn draw_observation(model: &ModelSpec, seed: u64, index: u64) -> Observation {
    let mut rng = observation_stream(seed, index);
    let t = model.t_dist.draw(rng.random::<f64>());
    let x: Vec<f64> = model.x_dist.iter().map(|d| d.draw(rng.random::<f64>())).collect();
    let eps = model.error.quantile(rng.random::<f64>());
    let y = dot(&model.beta0, &x) + eps;
    Observation { t, x, delta: y <= t }
}

/// The simulated errors for `(n, seed)`, in row order.
pub fn simulated_errors(model: &ModelSpec, n: usize, seed: u64) -> Vec<f64> {
    (0..n as u64)
        .map(|i| {
            let mut rng = observation_stream(seed, i);
            let _t: f64 = rng.random();
            for _ in &model.x_dist {
                let _: f64 = rng.random();
            }
            model.error.quantile(rng.random::<f64>())
        })
        .collect()
}

pub fn error_cdf(model: &ModelSpec, u: f64) -> f64 {
    model.error.cdf(u)
}

pub fn error_density(model: &ModelSpec, u: f64) -> f64 {
    model.error.density(u)
}

/// Interval of covariate values `x` compatible with `T - beta x = u`;
/// `X | T - beta X = u` is uniform on it. `None` outside the residual support.
pub fn conditional_x_interval(model: &ModelSpec, beta: f64, u: f64) -> Option<(f64, f64)> {
    let UniformLaw { lo: tl, hi: th } = model.t_dist;
    let UniformLaw { lo: xl, hi: xh } = model.x_dist[0];
    // need tl <= u + beta x <= th
    let (lo, hi) = if beta > 0.0 {
        (((tl - u) / beta).max(xl), ((th - u) / beta).min(xh))
    } else if beta < 0.0 {
        (((th - u) / beta).max(xl), ((tl - u) / beta).min(xh))
    } else if u >= tl && u <= th {
        (xl, xh)
    } else {
        return None;
    };
    (lo < hi).then_some((lo, hi))
}

/// Support `[lo, hi]` of `T - beta X`.
pub fn residual_support(model: &ModelSpec, beta: f64) -> (f64, f64) {
    let t = model.t_dist;
    let x = model.x_dist[0];
    let a = t.lo - beta * x.lo;
    let b = t.lo - beta * x.hi;
    let c = t.hi - beta * x.lo;
    let d = t.hi - beta * x.hi;
    (a.min(b).min(c).min(d), a.max(b).max(c).max(d))
}

/// Density of `T - beta X` (trapezoidal convolution of the two uniforms).
pub fn residual_density(model: &ModelSpec, beta: f64, u: f64) -> Result<f64> {
    model.require_scalar()?;
    Ok(match conditional_x_interval(model, beta, u) {
        Some((lo, hi)) => {
            let len = hi - lo;
            if beta == 0.0 {
                1.0 / model.t_dist.width()
            } else {
                len / (model.t_dist.width() * model.x_dist[0].width())
            }
        }
        None => 0.0,
    })
}

/// Points where population integrands in `u` lose smoothness: corners of
/// the residual density and the places where `u + (beta - beta0) x` crosses
/// the error support at the ends of the covariate range.
pub(crate) fn kink_points(model: &ModelSpec, beta: f64) -> Vec<f64> {
    let b0 = model.beta0[0];
    let d = beta - b0;
    let t = model.t_dist;
    let x = model.x_dist[0];
    let (el, eh) = model.error.support();
    let mut out = vec![
        t.lo - beta * x.lo,
        t.lo - beta * x.hi,
        t.hi - beta * x.lo,
        t.hi - beta * x.hi,
        el,
        eh,
    ];
    for xe in [x.lo, x.hi] {
        out.push(el - d * xe);
        out.push(eh - d * xe);
    }
    out
}

/// Conditional expectation of `g(x)` given `T - beta X = u`, by quadrature
/// over the uniform conditional law, split where `u + (beta - beta0) x`
/// meets the error support.
pub(crate) fn conditional_expectation<G: FnMut(f64) -> f64>(
    model: &ModelSpec,
    beta: f64,
    u: f64,
    tol: f64,
    mut g: G,
) -> Result<f64> {
    let (lo, hi) = conditional_x_interval(model, beta, u).ok_or(Error::ZeroDensity(u))?;
    let d = beta - model.beta0[0];
    let (el, eh) = model.error.support();
    let cuts: Vec<f64> = if d != 0.0 { vec![(el - u) / d, (eh - u) / d] } else { Vec::new() };
    let q = quadrature::integrate_refined(&mut g, lo, hi, &cuts, tol * (hi - lo))?;
    Ok(q.value / (hi - lo))
}

/// Population limit of the fixed-beta MLE:
/// `F_beta(u) = E[F0(u + (beta - beta0) X) | T - beta X = u]`.
pub fn f_beta(model: &ModelSpec, beta: f64, u: f64) -> Result<f64> {
    let b0 = model.require_scalar()?;
    if residual_density(model, beta, u)? <= 0.0 {
        return Err(Error::ZeroDensity(u));
    }
    let d = beta - b0;
    if d == 0.0 {
        return Ok(model.error.cdf(u));
    }
    let v = conditional_expectation(model, beta, u, 1e-10, |x| model.error.cdf(u + d * x))?;
    Ok(v.clamp(0.0, 1.0))
}
