//! Kernel smoothing: the triweight kernel, the density estimate built from
//! the jumps of the MLE, and the Nadaraya–Watson plug-in estimate of the
//! error distribution together with its derivative in beta.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::isotonic::StepDistribution;
use crate::model::Sample;

/// Bandwidth exponent for the plug-in distribution estimate, `h = c n^(-1/5)`.
pub const PLUGIN_RATE: f64 = 1.0 / 5.0;
/// Bandwidth exponent for the density estimate in the efficient MLE score.
pub const DENSITY_RATE: f64 = 1.0 / 7.0;
/// Bandwidth exponent for the plug-in intercept estimate.
pub const INTERCEPT_RATE: f64 = 1.0 / 3.0;

pub const DEFAULT_C_PLUGIN: f64 = 0.5;
pub const DEFAULT_C_DENSITY: f64 = 0.5;
pub const DEFAULT_C_INTERCEPT: f64 = 0.75;

/// `c * n^(-rate)`.
pub fn bandwidth(c: f64, n: usize, rate: f64) -> f64 {
    c * (n as f64).powf(-rate)
}

/// Symmetric, twice differentiable probability density supported on [-1, 1].
pub trait Kernel: Copy + Debug + Send + Sync {
    fn value(&self, u: f64) -> f64;
    fn deriv(&self, u: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Triweight;

impl Kernel for Triweight {
    #[inline]
    fn value(&self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        let a = 1.0 - u * u;
        35.0 / 32.0 * a * a * a
    }

    #[inline]
    fn deriv(&self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        let a = 1.0 - u * u;
        -105.0 / 16.0 * u * a * a
    }
}

/// `K(u) = (35/32)(1 - u^2)^3` on [-1, 1].
pub fn kernel(u: f64) -> f64 {
    Triweight.value(u)
}

/// `K'(u) = -(105/16) u (1 - u^2)^2` on [-1, 1].
pub fn kernel_deriv(u: f64) -> f64 {
    Triweight.deriv(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig<K: Kernel = Triweight> {
    bandwidth: f64,
    kernel: K,
    /// Drop the `j = i` term when the plug-in estimate is evaluated at
    /// observation `i`.
    pub leave_one_out: bool,
}

impl KernelConfig<Triweight> {
    pub fn new(bandwidth: f64) -> Result<Self> {
        Self::with_kernel(bandwidth, Triweight)
    }

    /// `h = c n^(-rate)`.
    pub fn from_rate(c: f64, n: usize, rate: f64) -> Result<Self> {
        Self::new(bandwidth(c, n, rate))
    }
}

impl<K: Kernel> KernelConfig<K> {
    pub fn with_kernel(bandwidth: f64, kernel: K) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { bandwidth, kernel, leave_one_out: false })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> K {
        self.kernel
    }

    /// `K_h(u) = K(u / h) / h`.
    #[inline]
    pub fn scaled(&self, u: f64) -> f64 {
        self.kernel.value(u / self.bandwidth) / self.bandwidth
    }

    /// `K'_h(u) = K'(u / h) / h^2`.
    #[inline]
    pub fn scaled_deriv(&self, u: f64) -> f64 {
        self.kernel.deriv(u / self.bandwidth) / (self.bandwidth * self.bandwidth)
    }
}

/// Range of indices of ascending `points` within `[v - h, v + h]`.
#[inline]
fn window(points: &[f64], v: f64, h: f64) -> std::ops::Range<usize> {
    let lo = points.partition_point(|&p| p < v - h);
    let hi = lo + points[lo..].partition_point(|&p| p <= v + h);
    lo..hi
}

/// Kernel density estimate `f_nh(u) = sum_jumps mass * K_h(u - knot)` from
/// the jumps of a step distribution.
#[derive(Debug, Clone)]
pub struct SmoothedDensity<K: Kernel = Triweight> {
    knots: Vec<f64>,
    masses: Vec<f64>,
    cfg: KernelConfig<K>,
}

impl<K: Kernel> SmoothedDensity<K> {
    pub fn new(dist: &StepDistribution, cfg: KernelConfig<K>) -> Self {
        let (knots, masses) = dist.jumps().unzip();
        Self { knots, masses, cfg }
    }

    pub fn eval(&self, u: f64) -> f64 {
        window(&self.knots, u, self.cfg.bandwidth)
            .map(|j| self.masses[j] * self.cfg.scaled(u - self.knots[j]))
            .sum()
    }
}

pub fn smoothed_density<K: Kernel>(dist: &StepDistribution, cfg: KernelConfig<K>, u: f64) -> f64 {
    SmoothedDensity::new(dist, cfg).eval(u)
}

/// Plug-in value and beta-derivative at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginPoint {
    pub value: f64,
    pub derivative: Vec<f64>,
    /// `g_{nh,beta}`, the kernel estimate of the residual density.
    pub density: f64,
}

/// Nadaraya–Watson estimate of the error distribution for a fixed beta:
/// `F_{nh,beta}(v) = sum_j delta_j K_h(v - u_j) / sum_j K_h(v - u_j)`.
///
/// Residuals are kept sorted so each evaluation only visits the
/// observations within one bandwidth.
#[derive(Debug, Clone)]
pub struct PluginEstimator<K: Kernel = Triweight> {
    cfg: KernelConfig<K>,
    k: usize,
    /// sorted residuals
    u: Vec<f64>,
    delta: Vec<f64>,
    /// covariates in sorted order, row-major with stride k
    x: Vec<f64>,
    /// position in sorted order of each original row
    rank: Vec<usize>,
}

impl<K: Kernel> PluginEstimator<K> {
    pub fn new(sample: &Sample, beta: &[f64], cfg: KernelConfig<K>) -> Result<Self> {
        let order = crate::model::residual_order(sample, beta)?;
        let k = sample.k();
        let n = sample.n();
        let obs = sample.observations();
        let mut u = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n * k);
        let mut rank = vec![0; n];
        for (pos, e) in order.entries().iter().enumerate() {
            u.push(e.u);
            delta.push(if e.delta { 1.0 } else { 0.0 });
            x.extend_from_slice(&obs[e.index].x);
            rank[e.index] = pos;
        }
        Ok(Self { cfg, k, u, delta, x, rank })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn config(&self) -> &KernelConfig<K> {
        &self.cfg
    }

    /// Sorted residuals.
    pub fn residuals(&self) -> &[f64] {
        &self.u
    }

    pub fn sorted_delta(&self, pos: usize) -> f64 {
        self.delta[pos]
    }

    pub fn sorted_x(&self, pos: usize) -> &[f64] {
        &self.x[pos * self.k..(pos + 1) * self.k]
    }

    pub fn sorted_position(&self, row: usize) -> usize {
        self.rank[row]
    }

    fn sums(&self, v: f64, skip: Option<usize>) -> (f64, f64) {
        let h = self.cfg.bandwidth;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for j in window(&self.u, v, h) {
            if Some(j) == skip {
                continue;
            }
            let w = self.cfg.scaled(v - self.u[j]);
            s0 += w;
            s1 += self.delta[j] * w;
        }
        (s0, s1)
    }

    /// `F_{nh,beta}(v)`, or `None` when no observation lies within `h` of `v`.
    pub fn value(&self, v: f64) -> Option<f64> {
        let (s0, s1) = self.sums(v, None);
        (s0 > 0.0).then(|| (s1 / s0).clamp(0.0, 1.0))
    }

    /// Value and derivative at residual `v` of a point with covariates `xv`.
    /// `skip` drops one sorted position from every sum.
    fn point(&self, v: f64, xv: &[f64], skip: Option<usize>) -> Option<PluginPoint> {
        let h = self.cfg.bandwidth;
        let k = self.k;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut a0 = 0.0;
        let mut a1 = 0.0;
        let mut b = vec![0.0; k];
        let mut c = vec![0.0; k];
        for j in window(&self.u, v, h) {
            if Some(j) == skip {
                continue;
            }
            let r = v - self.u[j];
            let w = self.cfg.scaled(r);
            let wd = self.cfg.scaled_deriv(r);
            let dj = self.delta[j];
            s0 += w;
            s1 += dj * w;
            a0 += wd;
            a1 += dj * wd;
            let xj = &self.x[j * k..(j + 1) * k];
            for m in 0..k {
                b[m] += xj[m] * wd;
                c[m] += xj[m] * dj * wd;
            }
        }
        if s0 <= 0.0 {
            return None;
        }
        let f = s1 / s0;
        // sum_j (x_j - x)(delta_j - F) K'_h(v - u_j) / sum_j K_h(v - u_j)
        let derivative = (0..k)
            .map(|m| (c[m] - f * b[m] - xv[m] * (a1 - f * a0)) / s0)
            .collect();
        Some(PluginPoint { value: f.clamp(0.0, 1.0), derivative, density: s0 / self.n() as f64 })
    }

    /// Value and derivative at an arbitrary `(t, x)`; the residual is `t - beta'x`
    /// for the beta this estimator was built with.
    pub fn at(&self, residual: f64, x: &[f64]) -> Option<PluginPoint> {
        self.point(residual, x, None)
    }

    /// Value and derivative at the observation in sorted position `pos`.
    pub fn at_sorted(&self, pos: usize) -> Option<PluginPoint> {
        let skip = self.cfg.leave_one_out.then_some(pos);
        self.point(self.u[pos], self.sorted_x(pos), skip)
    }

    /// Value at the observation in sorted position `pos`.
    pub fn value_at_sorted(&self, pos: usize) -> Option<f64> {
        let skip = self.cfg.leave_one_out.then_some(pos);
        let (s0, s1) = self.sums(self.u[pos], skip);
        (s0 > 0.0).then(|| (s1 / s0).clamp(0.0, 1.0))
    }
}

/// `F_{nh,beta}(v)`; `None` marks an excluded point (zero denominator).
pub fn plugin_f<K: Kernel>(sample: &Sample, beta: &[f64], cfg: KernelConfig<K>, v: f64) -> Result<Option<f64>> {
    Ok(PluginEstimator::new(sample, beta, cfg)?.value(v))
}

/// `d/dbeta F_{nh,beta}(t - beta'x)` at the point `(t, x)`; `None` when
/// `g_{nh,beta}` vanishes there.
pub fn plugin_df_dbeta<K: Kernel>(
    sample: &Sample,
    beta: &[f64],
    cfg: KernelConfig<K>,
    t: f64,
    x: &[f64],
) -> Result<Option<Vec<f64>>> {
    if x.len() != sample.k() {
        return Err(Error::DimensionMismatch { expected: sample.k(), got: x.len() });
    }
    let est = PluginEstimator::new(sample, beta, cfg)?;
    let v = t - crate::model::dot(beta, x);
    Ok(est.at(v, x).map(|p| p.derivative))
}
