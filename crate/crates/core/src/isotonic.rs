//! Nonparametric MLE of the error distribution for a fixed regression
//! parameter: the left derivative of the greatest convex minorant of the
//! cusum diagram, computed with pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{residual_order, ResidualOrder, Sample, TruncationSpec};

/// Right-continuous, non-decreasing step function with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepDistribution {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("knots must be strictly ascending".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("values must be non-decreasing within [0, 1]".into()));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// `F(u)` = value at the last knot `<= u`, 0 before the first knot.
    pub fn eval(&self, u: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= u);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Positive jumps `(knot, mass)` in ascending knot order.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 0.0;
        self.knots.iter().zip(&self.values).filter_map(move |(&k, &v)| {
            let mass = v - prev;
            prev = v;
            (mass > 0.0).then_some((k, mass))
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Points `(0, 0)` and `(i, sum_{j <= i} delta_(j))` for `i = 1..n`.
pub fn cusum_diagram(order: &ResidualOrder) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(order.len() + 1);
    out.push((0, 0.0));
    let mut acc = 0.0;
    for (i, e) in order.entries().iter().enumerate() {
        if e.delta {
            acc += 1.0;
        }
        out.push((i + 1, acc));
    }
    out
}

/// Weighted isotonic (non-decreasing) regression of `sums[i] / weights[i]`.
/// Returns one fitted value per input group.
pub fn pava(sums: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(sums.len(), weights.len());
    // blocks of (sum, weight, number of groups)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(sums.len());
    for (&s, &w) in sums.iter().zip(weights) {
        blocks.push((s, w, 1));
        while blocks.len() > 1 {
            let (s2, w2, c2) = blocks[blocks.len() - 1];
            let (s1, w1, c1) = blocks[blocks.len() - 2];
            // violation when mean1 > mean2
            if s1 * w2 > s2 * w1 {
                blocks.pop();
                let last = blocks.last_mut().expect("at least one block");
                *last = (s1 + s2, w1 + w2, c1 + c2);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(sums.len());
    for (s, w, c) in blocks {
        let v = s / w;
        out.extend(std::iter::repeat_n(v, c));
    }
    out
}

/// MLE fitted on a residual order: the step distribution together with the
/// fitted value for every entry of the order.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub distribution: StepDistribution,
    /// `F̂(u_(i))` for each sorted entry.
    pub fitted: Vec<f64>,
}

/// Pools exactly equal residuals, then runs PAVA on the group means.
pub fn mle_from_order(order: &ResidualOrder) -> MleFit {
    let entries = order.entries();
    let mut knots: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut group_of = Vec::with_capacity(entries.len());
    for e in entries {
        if knots.last() != Some(&e.u) {
            knots.push(e.u);
            sums.push(0.0);
            weights.push(0.0);
        }
        let g = knots.len() - 1;
        if e.delta {
            sums[g] += 1.0;
        }
        weights[g] += 1.0;
        group_of.push(g);
    }
    let values = pava(&sums, &weights);
    let fitted = group_of.iter().map(|&g| values[g]).collect();
    MleFit { distribution: StepDistribution { knots, values }, fitted }
}

pub fn mle_fixed_beta(sample: &Sample, beta: &[f64]) -> Result<StepDistribution> {
    let order = residual_order(sample, beta)?;
    Ok(mle_from_order(&order).distribution)
}

/// `delta log p + (1 - delta) log(1 - p)` with `0 log 0 = 0`.
#[inline]
pub fn bernoulli_loglik(delta: bool, p: f64) -> f64 {
    if delta {
        if p == 1.0 {
            0.0
        } else {
            p.ln()
        }
    } else if p == 0.0 {
        0.0
    } else {
        (1.0 - p).ln()
    }
}

/// Log likelihood `l_n(beta, F)`; with `trunc` only points whose value of
/// `F` lies in `[eps, 1 - eps]` contribute.
pub fn log_likelihood<F: Fn(f64) -> f64>(
    sample: &Sample,
    beta: &[f64],
    dist: F,
    trunc: Option<TruncationSpec>,
) -> Result<f64> {
    let order = residual_order(sample, beta)?;
    Ok(order
        .entries()
        .iter()
        .map(|e| {
            let p = dist(e.u);
            match trunc {
                Some(t) if !t.contains(p) => 0.0,
                _ => bernoulli_loglik(e.delta, p),
            }
        })
        .sum())
}

/// Truncated profile log likelihood `l_n^(eps)(beta, F̂_{n,beta})`.
pub fn truncated_profile_loglik(sample: &Sample, beta: &[f64], trunc: TruncationSpec) -> Result<f64> {
    let order = residual_order(sample, beta)?;
    let fit = mle_from_order(&order);
    Ok(order
        .entries()
        .iter()
        .zip(&fit.fitted)
        .filter(|(_, &p)| trunc.contains(p))
        .map(|(e, &p)| bernoulli_loglik(e.delta, p))
        .sum())
}
