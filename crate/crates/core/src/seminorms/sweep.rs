//! Lagged products and autocorrelation sweeps.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{argument, Result};
use crate::numeric::pairwise_dot;

/// Above this many multiply-adds (`N·(H+1)`) the sweep switches to FFT.
pub const FFT_THRESHOLD: usize = 1 << 20;

/// `r[h] = Σ_{n < a.len()} a[n]·b[n + h]` for `h = 0..=max_lag`.
/// Requires `b.len() ≥ a.len() + max_lag`.
pub fn lagged_products(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    assert!(b.len() >= a.len() + max_lag, "lag window overruns the buffer");
    if a.len().saturating_mul(max_lag + 1) <= FFT_THRESHOLD {
        lagged_products_naive(a, b, max_lag)
    } else {
        lagged_products_fft(a, b, max_lag)
    }
}

/// Direct `O(N·H)` evaluation; each lag is an independent pairwise dot product.
pub fn lagged_products_naive(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let n = a.len();
    (0..=max_lag)
        .into_par_iter()
        .map(|h| pairwise_dot(a, &b[h..h + n]))
        .collect()
}

/// Cross-correlation through one circular convolution of size `2^k ≥ |a| + H`.
pub fn lagged_products_fft(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let len_b = a.len() + max_lag;
    let size = len_b.next_power_of_two().max(2);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    // Pack both real signals into one complex transform: z = a + i·b.
    let mut z: Vec<Complex<f64>> = (0..size)
        .map(|i| {
            Complex::new(
                a.get(i).copied().unwrap_or(0.0),
                if i < len_b { b[i] } else { 0.0 },
            )
        })
        .collect();
    fwd.process(&mut z);
    // A_k = (Z_k + conj Z_{-k})/2, B_k = (Z_k − conj Z_{-k})/(2i); correlation spectrum conj(A_k)·B_k.
    let mut spec: Vec<Complex<f64>> = (0..size)
        .map(|k| {
            let zk = z[k];
            let zn = z[(size - k) % size].conj();
            let ak = (zk + zn) * 0.5;
            let bk = (zk - zn) * Complex::new(0.0, -0.5);
            ak.conj() * bk
        })
        .collect();
    inv.process(&mut spec);
    let scale = 1.0 / size as f64;
    spec[..=max_lag].iter().map(|v| v.re * scale).collect()
}

/// `γ(h) = (1/N) Σ_{n=1}^{N} v_n v_{n+h}` for `h = 0..=H`, with `v_1 = values[0]`
/// and `N = prefix_n`.
pub fn autocorrelation_sweep(values: &[f64], h: usize, prefix_n: usize) -> Result<Vec<f64>> {
    if prefix_n == 0 {
        return Err(argument("prefix length must be at least 1"));
    }
    if prefix_n + h > values.len() {
        return Err(argument(format!(
            "window overrun: N + H = {} exceeds {} values",
            prefix_n + h,
            values.len()
        )));
    }
    let nf = prefix_n as f64;
    Ok(lagged_products(&values[..prefix_n], &values[..prefix_n + h], h)
        .into_iter()
        .map(|s| s / nf)
        .collect())
}
