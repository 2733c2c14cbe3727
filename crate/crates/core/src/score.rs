//! Truncated score functions in beta and the solvers that locate their
//! zero-crossings (grid scan + bisection) or roots (Brent).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::mle_from_order;
use crate::kernel::{Kernel, KernelConfig, PluginEstimator, SmoothedDensity};
use crate::model::{residual_order, Sample, TruncationSpec};

/// Value of a truncated score with the bookkeeping of which points entered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreValue {
    pub value: Vec<f64>,
    /// points inside the truncation set
    pub n_used: usize,
    /// points where the plug-in estimate is undefined
    pub n_excluded: usize,
    /// points outside the truncation set
    pub n_outside: usize,
}

impl ScoreValue {
    fn finish(acc: Vec<f64>, n: usize, n_used: usize, n_excluded: usize, n_outside: usize) -> Self {
        let nf = n as f64;
        Self { value: acc.into_iter().map(|v| v / nf).collect(), n_used, n_excluded, n_outside }
    }
}

#[inline]
fn interior(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

/// `n^-1 sum_i x_i {delta_i - F̂_{n,beta}(u_i)}` over points with
/// `F̂_{n,beta}(u_i)` in `[eps, 1 - eps]`.
pub fn psi1(sample: &Sample, beta: &[f64], trunc: TruncationSpec) -> Result<ScoreValue> {
    let order = residual_order(sample, beta)?;
    let fit = mle_from_order(&order);
    let k = sample.k();
    let obs = sample.observations();
    let mut acc = vec![0.0; k];
    let (mut used, mut outside) = (0, 0);
    for (e, &p) in order.entries().iter().zip(&fit.fitted) {
        if !trunc.contains(p) {
            outside += 1;
            continue;
        }
        used += 1;
        let r = if e.delta { 1.0 - p } else { -p };
        for (a, &x) in acc.iter_mut().zip(&obs[e.index].x) {
            *a += x * r;
        }
    }
    Ok(ScoreValue::finish(acc, sample.n(), used, 0, outside))
}

/// Efficient score built on the MLE:
/// `n^-1 sum_i x_i f_nh(u_i) {delta_i - F̂(u_i)} / [F̂(u_i){1 - F̂(u_i)}]`
/// over the truncation set, with `f_nh` smoothed from the jumps of `F̂`.
pub fn psi2<K: Kernel>(sample: &Sample, beta: &[f64], trunc: TruncationSpec, cfg: KernelConfig<K>) -> Result<ScoreValue> {
    let order = residual_order(sample, beta)?;
    let fit = mle_from_order(&order);
    let dens = SmoothedDensity::new(&fit.distribution, cfg);
    let k = sample.k();
    let obs = sample.observations();
    let mut acc = vec![0.0; k];
    let (mut used, mut outside) = (0, 0);
    for (e, &p) in order.entries().iter().zip(&fit.fitted) {
        if !trunc.contains(p) || !interior(p) {
            outside += 1;
            continue;
        }
        used += 1;
        let d = if e.delta { 1.0 } else { 0.0 };
        let w = dens.eval(e.u) * (d - p) / (p * (1.0 - p));
        for (a, &x) in acc.iter_mut().zip(&obs[e.index].x) {
            *a += x * w;
        }
    }
    Ok(ScoreValue::finish(acc, sample.n(), used, 0, outside))
}

/// Plug-in score:
/// `n^-1 sum_i dF_{nh,beta}(u_i)/dbeta {delta_i - F_nh(u_i)} / [F_nh(u_i){1 - F_nh(u_i)}]`
/// over points with `F_nh(u_i)` in `[eps, 1 - eps]`; undefined points are
/// skipped and counted.
pub fn psi3<K: Kernel>(sample: &Sample, beta: &[f64], trunc: TruncationSpec, cfg: KernelConfig<K>) -> Result<ScoreValue> {
    let est = PluginEstimator::new(sample, beta, cfg)?;
    Ok(psi3_from_estimator(&est, trunc))
}

pub(crate) fn psi3_from_estimator<K: Kernel>(est: &PluginEstimator<K>, trunc: TruncationSpec) -> ScoreValue {
    let n = est.n();
    let k = est.sorted_x(0).len();
    let mut acc = vec![0.0; k];
    let (mut used, mut excluded, mut outside) = (0, 0, 0);
    for pos in 0..n {
        // cheap pass first: most points fall outside the truncation set
        let Some(p) = est.value_at_sorted(pos) else {
            excluded += 1;
            continue;
        };
        if !trunc.contains(p) || !interior(p) {
            outside += 1;
            continue;
        }
        let Some(pt) = est.at_sorted(pos) else {
            excluded += 1;
            continue;
        };
        used += 1;
        let f = pt.value;
        let w = (est.sorted_delta(pos) - f) / (f * (1.0 - f));
        for (a, d) in acc.iter_mut().zip(&pt.derivative) {
            *a += d * w;
        }
    }
    ScoreValue::finish(acc, n, used, excluded, outside)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    GridBisection,
    Brent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingResult {
    pub beta_hat: f64,
    /// final bracket; the score has opposite signs (or a zero) at its ends
    pub bracket: (f64, f64),
    /// grid cell in which the crossing was found
    pub cell: (f64, f64),
    pub evaluations: usize,
    /// number of distinct crossings seen on the grid; a lazy scan only
    /// counts those inside the part it evaluated
    pub crossings: usize,
    pub method: SolverMethod,
}

/// Score values on an equispaced grid and the crossings found there.
#[derive(Debug, Clone)]
pub struct GridScan {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `(i, j)`: either a strict sign change between grid points `i` and
    /// `j = i + 1`, or a run of exact zeros from `i` to `j`.
    pub crossings: Vec<(usize, usize)>,
}

impl GridScan {
    pub fn run<F: FnMut(f64) -> f64>(mut score: F, interval: (f64, f64), grid_points: usize) -> Result<Self> {
        let (lo, hi) = interval;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("search interval [{lo}, {hi}] is empty")));
        }
        if grid_points == 0 || (grid_points == 1 && lo != hi) || (grid_points >= 2 && lo == hi) {
            return Err(Error::InvalidParameter(format!(
                "need at least two grid points on a non-degenerate interval, got {grid_points}"
            )));
        }
        let grid: Vec<f64> = if grid_points == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (grid_points - 1) as f64;
            (0..grid_points).map(|i| if i + 1 == grid_points { hi } else { lo + step * i as f64 }).collect()
        };
        let values: Vec<f64> = grid.iter().map(|&b| score(b)).collect();
        let mut crossings = Vec::new();
        let mut i = 0;
        while i < values.len() {
            if values[i] == 0.0 {
                let start = i;
                while i + 1 < values.len() && values[i + 1] == 0.0 {
                    i += 1;
                }
                crossings.push((start, i));
            } else if i + 1 < values.len() && values[i + 1] != 0.0 && (values[i] < 0.0) != (values[i + 1] < 0.0) {
                crossings.push((i, i + 1));
            }
            i += 1;
        }
        Ok(Self { grid, values, crossings })
    }

    pub fn identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Crossing whose grid bracket midpoint is nearest `target`; earlier wins ties.
    pub fn nearest(&self, target: f64) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for &(i, j) in &self.crossings {
            let d = (0.5 * (self.grid[i] + self.grid[j]) - target).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some(((i, j), d));
            }
        }
        best.map(|(c, _)| c)
    }

    fn no_crossing(&self) -> Error {
        let lo = self.grid[0];
        let hi = *self.grid.last().expect("grid is non-empty");
        let reason = if self.identically_zero() {
            "score vanishes identically on the grid".to_string()
        } else {
            "score has constant nonzero sign on the grid".to_string()
        };
        Error::NoCrossing { lo, hi, reason }
    }
}

/// Grid scan that evaluates outward from the grid point nearest `target`
/// and stops as soon as no unevaluated cell can hold a crossing nearer
/// than the best one found. Selects the same crossing as
/// [`GridScan::nearest`] on a full scan.
#[derive(Debug, Clone)]
pub struct NearestScan {
    pub grid: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub pick: Option<(usize, usize)>,
    /// crossings completed inside the evaluated window
    pub crossings_seen: usize,
    pub evaluations: usize,
}

impl NearestScan {
    pub fn run<F: FnMut(f64) -> f64>(mut score: F, interval: (f64, f64), grid_points: usize, target: f64) -> Result<Self> {
        let grid = GridScan::run(|_| 1.0, interval, grid_points)?.grid;
        let m = grid.len();
        let mut values: Vec<Option<f64>> = vec![None; m];
        let mut evaluations = 0;
        let mut eval = |i: usize, values: &mut Vec<Option<f64>>| {
            if values[i].is_none() {
                values[i] = Some(score(grid[i]));
                evaluations += 1;
            }
        };
        let mut i0 = 0;
        for i in 1..m {
            if (grid[i] - target).abs() < (grid[i0] - target).abs() {
                i0 = i;
            }
        }
        let (mut l, mut r) = (i0, i0);
        eval(i0, &mut values);
        loop {
            let v = |i: usize| values[i].expect("inside the evaluated window");
            // complete crossings inside [l, r]
            let mut found: Vec<(usize, usize)> = Vec::new();
            let mut i = l;
            while i <= r {
                if v(i) == 0.0 {
                    let start = i;
                    while i < r && v(i + 1) == 0.0 {
                        i += 1;
                    }
                    let closed_left = start > l || start == 0;
                    let closed_right = i < r || i == m - 1;
                    if closed_left && closed_right {
                        found.push((start, i));
                    }
                } else if i < r && v(i + 1) != 0.0 && (v(i) < 0.0) != (v(i + 1) < 0.0) {
                    found.push((i, i + 1));
                }
                i += 1;
            }
            let dist = |(a, b): (usize, usize)| (0.5 * (grid[a] + grid[b]) - target).abs();
            let mut best: Option<((usize, usize), f64)> = None;
            for &c in &found {
                let d = dist(c);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
            // lower bounds on the distance of any crossing that needs points outside [l, r]
            let left_bound = if l == 0 {
                f64::INFINITY
            } else if v(l) == 0.0 {
                f64::NEG_INFINITY
            } else {
                target - 0.5 * (grid[l - 1] + grid[l])
            };
            let right_bound = if r == m - 1 {
                f64::INFINITY
            } else if v(r) == 0.0 {
                f64::NEG_INFINITY
            } else {
                0.5 * (grid[r] + grid[r + 1]) - target
            };
            let settled = match best {
                Some((_, d)) => d < left_bound && d <= right_bound,
                None => l == 0 && r == m - 1,
            };
            if settled || (l == 0 && r == m - 1) {
                return Ok(Self {
                    pick: best.map(|(c, _)| c),
                    crossings_seen: found.len(),
                    grid,
                    values,
                    evaluations,
                });
            }
            if l > 0 && (left_bound <= right_bound || r == m - 1) {
                l -= 1;
                eval(l, &mut values);
            } else {
                r += 1;
                eval(r, &mut values);
            }
        }
    }

    /// True when the whole grid was evaluated and every value is zero.
    pub fn identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Some(0.0))
    }
}

/// Locates a zero-crossing: scans an equispaced grid for a sign change (or
/// exact zero), picks the crossing nearest the interval midpoint and
/// bisects its cell on sign until it is at most `refine_tol` wide.
pub fn find_zero_crossing<F: FnMut(f64) -> f64>(
    mut score: F,
    interval: (f64, f64),
    grid_points: usize,
    refine_tol: f64,
) -> Result<CrossingResult> {
    let scan = GridScan::run(&mut score, interval, grid_points)?;
    if scan.identically_zero() {
        return Err(scan.no_crossing());
    }
    let mid = 0.5 * (interval.0 + interval.1);
    let (i, j) = scan.nearest(mid).ok_or_else(|| scan.no_crossing())?;
    let mut evaluations = scan.grid.len();
    let cell = (scan.grid[i], scan.grid[j]);
    let crossings = scan.crossings.len();
    if scan.values[i] == 0.0 {
        return Ok(CrossingResult {
            beta_hat: 0.5 * (cell.0 + cell.1),
            bracket: cell,
            cell,
            evaluations,
            crossings,
            method: SolverMethod::GridBisection,
        });
    }
    let (mut a, mut b) = cell;
    let fa = scan.values[i];
    while b - a > refine_tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = score(m);
        evaluations += 1;
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(CrossingResult {
        beta_hat: 0.5 * (a + b),
        bracket: (a, b),
        cell,
        evaluations,
        crossings,
        method: SolverMethod::GridBisection,
    })
}

/// Brent's method on a sign-changing bracket, iterated until the bracket
/// is at most `tol` wide.
pub fn find_root_brent<F: FnMut(f64) -> f64>(mut f: F, bracket: (f64, f64), tol: f64) -> Result<CrossingResult> {
    let (lo, hi) = bracket;
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    let mut evaluations = 2;
    let done = |beta_hat: f64, br: (f64, f64), evaluations: usize| CrossingResult {
        beta_hat,
        bracket: (br.0.min(br.1), br.0.max(br.1)),
        cell: (lo, hi),
        evaluations,
        crossings: 1,
        method: SolverMethod::Brent,
    };
    if fa == 0.0 {
        return Ok(done(a, (a, a), evaluations));
    }
    if fb == 0.0 {
        return Ok(done(b, (b, b), evaluations));
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(Error::BracketInvalid { lo, hi, f_lo: fa, f_hi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb < 0.0) == (fc < 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            if fb == 0.0 {
                return Ok(done(b, (b, b), evaluations));
            }
            return Ok(done(b, (b, c), evaluations));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        evaluations += 1;
    }
    Ok(done(b, (b, c), evaluations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Observation;

    #[test]
    fn grid_scan_step_values() {
        let vals = [-1.0, -0.2, 0.3, 1.0];
        let grid = [0.1, 0.2, 0.3, 0.4];
        let score = |b: f64| {
            let i = grid.iter().position(|&g| (g - b).abs() < 1e-12).unwrap();
            vals[i]
        };
        let r = find_zero_crossing(score, (0.1, 0.4), 4, 0.2).unwrap();
        assert!((r.cell.0 - 0.2).abs() < 1e-12 && (r.cell.1 - 0.3).abs() < 1e-12);
        assert_eq!(r.bracket, r.cell);
        assert_eq!(r.crossings, 1);
    }

    #[test]
    fn right_continuous_step_is_bisected_to_jump() {
        let score = |b: f64| if b < 0.3 { -0.2 } else { 0.3 };
        let r = find_zero_crossing(score, (0.1, 0.4), 4, 1e-9).unwrap();
        assert!((r.beta_hat - 0.3).abs() < 1e-9);
        assert!(r.bracket.0 < 0.3 && r.bracket.1 >= 0.3);
    }

    #[test]
    fn constant_sign_has_no_crossing() {
        assert!(matches!(find_zero_crossing(|_| 1.0, (0.0, 1.0), 100, 1e-6), Err(Error::NoCrossing { .. })));
        assert!(matches!(find_zero_crossing(|_| 0.0, (0.0, 1.0), 100, 1e-6), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn bisection_on_known_root() {
        let r = find_zero_crossing(|b| (b - 0.5).signum() * (b - 0.5).abs(), (0.3, 0.7), 100, 1e-6).unwrap();
        assert!((r.beta_hat - 0.5).abs() <= 1e-6);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-6);
    }

    #[test]
    fn nearest_crossing_to_midpoint_is_chosen() {
        // roots at 0.15, 0.55 and 0.85 on [0, 1]
        let f = |b: f64| (b - 0.15) * (b - 0.55) * (b - 0.85);
        let r = find_zero_crossing(f, (0.0, 1.0), 100, 1e-8).unwrap();
        assert_eq!(r.crossings, 3);
        assert!((r.beta_hat - 0.55).abs() < 1e-8);
    }

    #[test]
    fn zero_run_is_a_crossing() {
        let f = |b: f64| {
            if b < 0.35 {
                -1.0
            } else if b <= 0.65 {
                0.0
            } else {
                1.0
            }
        };
        let r = find_zero_crossing(f, (0.0, 1.0), 11, 1e-8).unwrap();
        assert!((r.beta_hat - 0.5).abs() < 1e-12);
        assert_eq!(r.crossings, 1);
    }

    #[test]
    fn brent_examples() {
        let r = find_root_brent(|b| b - 0.5, (0.0, 1.0), 1e-10).unwrap();
        assert!((r.beta_hat - 0.5).abs() <= 1e-10);
        let r = find_root_brent(|b| (b - 0.5).powi(3), (0.0, 1.0), 1e-10).unwrap();
        assert!((r.beta_hat - 0.5).abs() <= 1e-6);
        assert!(r.bracket.0 <= r.beta_hat && r.beta_hat <= r.bracket.1);
        // fixed point of cos, reference by plain iteration
        let mut x: f64 = 0.5;
        for _ in 0..200 {
            x = x.cos();
        }
        let r = find_root_brent(|b: f64| b.cos() - b, (0.0, 1.0), 1e-10).unwrap();
        assert!((r.beta_hat - x).abs() < 1e-9);
        assert!((r.beta_hat - 0.7390851).abs() < 1e-7);
    }

    #[test]
    fn brent_bracket_errors() {
        assert!(matches!(find_root_brent(|b| b * b + 1.0, (0.0, 1.0), 1e-8), Err(Error::BracketInvalid { .. })));
        let r = find_root_brent(|b| b, (0.0, 1.0), 1e-8).unwrap();
        assert_eq!(r.beta_hat, 0.0);
    }

    #[test]
    fn brent_final_bracket_has_sign_change() {
        let f = |b: f64| (3.0 * b).tanh() - 0.2;
        let r = find_root_brent(f, (-2.0, 2.0), 1e-9).unwrap();
        assert!(f(r.bracket.0) * f(r.bracket.1) <= 0.0);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-9 + 1e-15);
    }

    #[test]
    fn nearest_scan_agrees_with_full_scan() {
        let patterns: [&[f64]; 6] = [
            &[-1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0],
            &[0.0, 0.0, 0.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0, 0.0, -1.0],
            &[-1.0, -1.0, -1.0, 0.0],
            &[1.0, 1.0, 1.0, 1.0],
            &[1.0, -1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0],
        ];
        for vals in patterns {
            let m = vals.len();
            let f = |b: f64| vals[(b * (m - 1) as f64).round() as usize];
            let full = GridScan::run(f, (0.0, 1.0), m).unwrap();
            let lazy = NearestScan::run(f, (0.0, 1.0), m, 0.5).unwrap();
            let expect = if full.identically_zero() { None } else { full.nearest(0.5) };
            let got = if lazy.identically_zero() { None } else { lazy.pick };
            assert_eq!(got, expect, "{vals:?}");
        }
    }

    fn sample(rows: &[(f64, f64, bool)]) -> Sample {
        Sample::new(rows.iter().map(|&(t, x, d)| Observation::new(t, vec![x], d)).collect()).unwrap()
    }

    #[test]
    fn psi1_empty_truncation_set() {
        let s = sample(&[(0.1, 0.3, false), (0.5, 1.0, false), (0.9, 0.2, false)]);
        let v = psi1(&s, &[0.5], TruncationSpec::default()).unwrap();
        assert_eq!(v.value, vec![0.0]);
        assert_eq!(v.n_used, 0);
        assert_eq!(v.n_outside, 3);
    }

    #[test]
    fn psi1_two_point_hand_case() {
        // beta = 0: sorted by t, deltas (1, 0), F̂ = 0.5 at both
        let (x1, x2) = (0.3, 1.7);
        let s = sample(&[(0.2, x1, true), (0.6, x2, false)]);
        let v = psi1(&s, &[0.0], TruncationSpec::default()).unwrap();
        assert!((v.value[0] - (x1 - x2) / 4.0).abs() < 1e-15);
        assert_eq!(v.n_used, 2);
    }

    #[test]
    fn psi2_empty_truncation_set_and_block_start_density() {
        let s = sample(&[(0.1, 0.3, true), (0.5, 1.0, true)]);
        let cfg = KernelConfig::new(0.1).unwrap();
        assert_eq!(psi2(&s, &[0.0], TruncationSpec::default(), cfg).unwrap().value, vec![0.0]);

        // sorted deltas (0, 1, 0, 1): F̂ = (0, .5, .5, 1); jumps of 0.5 at u = 1 and u = 3.
        // With h below every gap, only the block start u = 1 sees the kernel mass.
        let s = sample(&[(0.0, 0.4, false), (1.0, 0.8, true), (2.0, 1.3, false), (3.0, 0.6, true)]);
        let h = 0.5;
        let cfg = KernelConfig::new(h).unwrap();
        let v = psi2(&s, &[0.0], TruncationSpec::default(), cfg).unwrap();
        let f_at_block_start = 0.5 * 1.09375 / h;
        let expected = 0.8 * f_at_block_start * (1.0 - 0.5) / 0.25 / 4.0;
        assert!((v.value[0] - expected).abs() < 1e-14);
        assert_eq!(v.n_used, 2);
    }

    #[test]
    fn psi3_trivial_cases() {
        let s = sample(&[(0.1, 0.3, false), (0.5, 1.0, false)]);
        let cfg = KernelConfig::new(0.3).unwrap();
        let v = psi3(&s, &[0.5], TruncationSpec::default(), cfg).unwrap();
        assert_eq!(v.value, vec![0.0]);
        assert_eq!(v.n_used, 0);

        let s = sample(&[(0.1, 0.7, false), (0.2, 0.7, true), (0.25, 0.7, false), (0.4, 0.7, true)]);
        let v = psi3(&s, &[0.5], TruncationSpec::default(), cfg).unwrap();
        assert!(v.n_used > 0);
        assert!(v.value[0].abs() < 1e-12);
    }

    #[test]
    fn psi3_counts_excluded_points_with_leave_one_out() {
        let s = sample(&[(0.0, 0.0, true), (5.0, 0.0, false), (5.1, 0.0, true)]);
        let mut cfg = KernelConfig::new(0.5).unwrap();
        cfg.leave_one_out = true;
        let v = psi3(&s, &[0.0], TruncationSpec::default(), cfg).unwrap();
        assert_eq!(v.n_excluded, 1);
        assert_eq!(v.n_used + v.n_excluded + v.n_outside, 3);
    }
}
