//! Small statistical helpers shared by estimators and validation checks.

use crate::numeric::pairwise_sum;

/// Kolmogorov–Smirnov distance between the empirical distribution of `xs`
/// and the uniform distribution on `[0, 1)`.
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let lo = (x - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - x).abs();
        acc.max(lo).max(hi)
    })
}

/// Mean of a slice (pairwise-summed).
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Standard error of the mean, from the unbiased sample variance.
pub fn stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
}

/// `sup − inf` of the slice.
pub fn spread(xs: &[f64]) -> f64 {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if xs.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
