#![allow(dead_code)]

use csreg::model::{ResidualEntry, ResidualOrder};

/// Left slopes of the greatest convex minorant of the points `(0, 0)`,
/// `(i, s_i)`, built as a lower hull with integer cross products.
pub fn gcm_left_slopes(cum: &[i64]) -> Vec<f64> {
    let pts: Vec<(i64, i64)> = cum.iter().enumerate().map(|(i, &s)| (i as i64, s)).collect();
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b unless it lies strictly below the chord a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(pts.len() - 1);
    for w in hull.windows(2) {
        let slope = (w[1].1 - w[0].1) as f64 / (w[1].0 - w[0].0) as f64;
        for _ in w[0].0..w[1].0 {
            out.push(slope);
        }
    }
    out
}

pub fn order_from_deltas(deltas: &[bool]) -> ResidualOrder {
    ResidualOrder::from_entries_unchecked(
        deltas.iter().enumerate().map(|(i, &d)| ResidualEntry { u: i as f64, delta: d, index: i }).collect(),
    )
}

pub fn cusum(deltas: &[bool]) -> Vec<i64> {
    let mut out = vec![0];
    for &d in deltas {
        out.push(out.last().unwrap() + d as i64);
    }
    out
}

pub fn deltas_from_mask(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 0 {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
