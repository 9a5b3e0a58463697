//! Weighted descriptive statistics shared by calibration and aggregation.
//!
//! All functions take parallel `values` / `weights` slices. Weights must be
//! positive; results are invariant to a uniform rescaling of the weights.

use std::cmp::Ordering;

pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Option<f64> {
    debug_assert_eq!(values.len(), weights.len());
    let total: f64 = weights.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return None;
    }
    let sum: f64 = values.iter().zip(weights).map(|(x, w)| x * w).sum();
    Some(sum / total)
}

/// Weighted population variance, `sum w (x - m)^2 / sum w`.
pub fn weighted_variance(values: &[f64], weights: &[f64]) -> Option<f64> {
    let mean = weighted_mean(values, weights)?;
    let total: f64 = weights.iter().sum();
    let ss: f64 = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean).powi(2))
        .sum();
    Some(ss / total)
}

/// Kish effective sample size, `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Weighted skewness (third standardized central moment).
pub fn weighted_skewness(values: &[f64], weights: &[f64]) -> Option<f64> {
    let mean = weighted_mean(values, weights)?;
    let var = weighted_variance(values, weights)?;
    if var <= 0.0 {
        return Some(0.0);
    }
    let total: f64 = weights.iter().sum();
    let m3: f64 = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean).powi(3))
        .sum::<f64>()
        / total;
    Some(m3 / var.powf(1.5))
}

fn sorted_pairs(values: &[f64], weights: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    pairs
}

/// Weighted quantile by linear interpolation between order statistics.
///
/// Each sorted observation `k` sits at plotting position
/// `(C_k - w_k / 2) / W`, where `C_k` is the cumulative weight through `k`
/// and `W` the total weight. Probabilities below the first (above the last)
/// position return the minimum (maximum). With equal weights this is the
/// midpoint (Hazen) rule, so `{1, 3}` has median 2.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let pairs = sorted_pairs(values, weights);
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return None;
    }
    let mut cum = 0.0;
    let positions: Vec<f64> = pairs
        .iter()
        .map(|(_, w)| {
            cum += w;
            (cum - w / 2.0) / total
        })
        .collect();
    if p <= positions[0] {
        return Some(pairs[0].0);
    }
    let last = pairs.len() - 1;
    if p >= positions[last] {
        return Some(pairs[last].0);
    }
    let hi = positions.partition_point(|&pos| pos < p);
    let lo = hi - 1;
    let span = positions[hi] - positions[lo];
    let frac = if span > 0.0 { (p - positions[lo]) / span } else { 0.0 };
    Some(pairs[lo].0 + frac * (pairs[hi].0 - pairs[lo].0))
}

/// Percentile rank (0..=100) of `value` within a weighted sample: weight
/// strictly below plus half the weight tied at `value`.
pub fn percentile_of(values: &[f64], weights: &[f64], value: f64) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return None;
    }
    let mut below = 0.0;
    let mut tied = 0.0;
    for (x, w) in values.iter().zip(weights) {
        match x.partial_cmp(&value) {
            Some(Ordering::Less) => below += w,
            Some(Ordering::Equal) => tied += w,
            _ => {}
        }
    }
    Some(100.0 * (below + 0.5 * tied) / total)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Ranks starting at 1, ties receive their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}
