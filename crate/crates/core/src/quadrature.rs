//! Gauss–Legendre quadrature with fixed refinement levels.
//!
//! Integrands in this crate are smooth between a handful of known kinks
//! (support endpoints of the error law, corners of the conditional covariate
//! interval). Callers pass those kinks as breakpoints so that each segment is
//! smooth, and convergence is checked by comparing successive node counts.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Node counts per segment, tried in order until two successive levels agree.
pub const REFINEMENT_LEVELS: [usize; 3] = [64, 128, 256];

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule on [-1, 1] by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess for the i-th root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared rule for a refinement level.
pub fn rule(nodes: usize) -> &'static GaussLegendre {
    static RULES: [OnceLock<GaussLegendre>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    match REFINEMENT_LEVELS.iter().position(|&l| l == nodes) {
        Some(i) => RULES[i].get_or_init(|| GaussLegendre::new(nodes)),
        None => panic!("no cached rule with {nodes} nodes"),
    }
}

/// Splits `[a, b]` at every breakpoint strictly inside it.
pub fn segments(a: f64, b: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c.is_finite() && c > a && c < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for c in cuts {
        out.push((lo, c));
        lo = c;
    }
    out.push((lo, b));
    out
}

/// Composite rule with `nodes` points on each segment.
pub fn composite<F: FnMut(f64) -> f64>(f: &mut F, segs: &[(f64, f64)], nodes: usize) -> f64 {
    let r = rule(nodes);
    segs.iter().map(|&(lo, hi)| r.integrate(&mut *f, lo, hi)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Absolute change between the last two refinement levels.
    pub change: f64,
    pub nodes: usize,
}

/// Integrates over `[a, b]` split at `breakpoints`, refining 64 → 128 → 256
/// nodes per segment until successive levels differ by less than `tol`.
pub fn integrate_refined<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> Result<Quadrature> {
    if !(a < b) {
        return Ok(Quadrature { value: 0.0, change: 0.0, nodes: 0 });
    }
    let segs = segments(a, b, breakpoints);
    let mut prev = composite(&mut f, &segs, REFINEMENT_LEVELS[0]);
    let mut change = f64::INFINITY;
    for &nodes in &REFINEMENT_LEVELS[1..] {
        let cur = composite(&mut f, &segs, nodes);
        change = (cur - prev).abs();
        if !cur.is_finite() {
            break;
        }
        if change < tol {
            return Ok(Quadrature { value: cur, change, nodes });
        }
        prev = cur;
    }
    Err(Error::QuadratureDivergence { change, tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 64, 128, 256] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = GaussLegendre::new(5);
        // x^9 odd, x^8 integrates to 2/9 on [-1,1]
        assert!(r.integrate(|x| x.powi(9), -1.0, 1.0).abs() < 1e-15);
        assert!((r.integrate(|x| x.powi(8), -1.0, 1.0) - 2.0 / 9.0).abs() < 1e-14);
        assert!((r.integrate(|x| x * x, 0.0, 3.0) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn refined_handles_kinks_at_breakpoints() {
        let q = integrate_refined(|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1e-12).unwrap();
        assert!((q.value - 2.5).abs() < 1e-13);
    }

    #[test]
    fn refined_reports_divergence() {
        // 1/sqrt(x) is integrable but converges too slowly for 1e-14.
        let r = integrate_refined(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], 1e-14);
        assert!(matches!(r, Err(Error::QuadratureDivergence { .. })));
    }

    #[test]
    fn segments_ignore_outside_and_duplicate_cuts() {
        let s = segments(0.0, 1.0, &[0.5, -1.0, 0.5, 1.0, 0.25]);
        assert_eq!(s, vec![(0.0, 0.25), (0.25, 0.5), (0.5, 1.0)]);
    }
}
