//! Cesàro-type ergodic averages with running convergence profiles, and a
//! finitary van der Corput inequality checker.

use serde::{Deserialize, Serialize};

use crate::criterion::WeightSequence;
use crate::error::{argument, Result};
use crate::numeric::{pairwise_dot, pairwise_sum, CompensatedSum};
use crate::systems::{strided_values, Dynamics, Observable, State};

/// Default tail-oscillation tolerance for declaring convergence.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 0.02;

/// Partial averages `A_N = (1/N) Σ_{n=1}^N s_n` at increasing checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageProfile {
    pub checkpoints: Vec<usize>,
    pub values: Vec<f64>,
    /// `sup − inf` of `A_N` over checkpoints in `[N_max/2, N_max]`.
    pub oscillation: f64,
    /// Product of the sup bounds of the averaged factors.
    pub bound: f64,
}

impl AverageProfile {
    /// Build a profile from summands `s_1, s_2, …` (index 0 holds `s_1`).
    ///
    /// Segments between checkpoints are summed pairwise and chained with a
    /// compensated running total, so the result only depends on the data and
    /// the checkpoint list.
    pub fn from_summands(summands: &[f64], checkpoints: &[usize], bound: f64) -> Result<Self> {
        validate_checkpoints(checkpoints)?;
        let n_max = *checkpoints.last().unwrap();
        if n_max > summands.len() {
            return Err(argument(format!(
                "checkpoint {n_max} exceeds the {} available terms",
                summands.len()
            )));
        }
        let mut total = CompensatedSum::default();
        let mut prev = 0usize;
        let mut values = Vec::with_capacity(checkpoints.len());
        for &n in checkpoints {
            total.add(pairwise_sum(&summands[prev..n]));
            values.push(total.value() / n as f64);
            prev = n;
        }
        let oscillation = tail_oscillation(checkpoints, &values);
        Ok(AverageProfile {
            checkpoints: checkpoints.to_vec(),
            values,
            oscillation,
            bound,
        })
    }

    /// Value at the last checkpoint.
    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty profile")
    }

    pub fn n_max(&self) -> usize {
        *self.checkpoints.last().expect("non-empty profile")
    }

    /// Tail oscillation below `tol`.
    pub fn converged(&self, tol: f64) -> bool {
        self.oscillation < tol
    }

    /// Every partial average within the product of sup bounds (plus rounding).
    pub fn within_bound(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.abs() <= self.bound * (1.0 + 1e-12) + 1e-15)
    }

    /// CSV rows `experiment_id,N,value` with a header line.
    pub fn to_csv(&self, experiment_id: &str) -> String {
        let mut out = String::from("experiment_id,N,value\n");
        for (n, v) in self.checkpoints.iter().zip(&self.values) {
            out.push_str(&format!("{experiment_id},{n},{v}\n"));
        }
        out
    }
}

fn validate_checkpoints(checkpoints: &[usize]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(argument("checkpoint list is empty"));
    }
    if checkpoints[0] == 0 {
        return Err(argument("checkpoints start at N = 1"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(argument("checkpoints must be strictly increasing"));
    }
    Ok(())
}

/// `sup − inf` of the values whose checkpoint lies in `[N_max/2, N_max]`.
pub fn tail_oscillation(checkpoints: &[usize], values: &[f64]) -> f64 {
    let n_max = match checkpoints.last() {
        Some(&n) => n,
        None => return 0.0,
    };
    let tail: Vec<f64> = checkpoints
        .iter()
        .zip(values)
        .filter(|(&n, _)| 2 * n >= n_max)
        .map(|(_, &v)| v)
        .collect();
    crate::stats::spread(&tail)
}

/// A checkpoint grid: powers of two below `n_max / 2`, then `tail_points`
/// evenly spaced checkpoints on `[n_max/2, n_max]`.
pub fn default_checkpoints(n_max: usize, tail_points: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let half = (n_max / 2).max(1);
    let mut p = 1usize;
    while p < half {
        out.push(p);
        p *= 2;
    }
    let k = tail_points.max(1);
    for i in 0..=k {
        let n = half + (n_max - half) * i / k;
        if out.last().is_none_or(|&l| n > l) {
            out.push(n);
        }
    }
    out
}

/// `(1/N) Σ_{n=1}^N f(T^n x)`.
pub fn birkhoff_average(
    system: &dyn Dynamics,
    f: &Observable,
    x: &State,
    checkpoints: &[usize],
) -> Result<AverageProfile> {
    validate_checkpoints(checkpoints)?;
    let n_max = *checkpoints.last().unwrap() as i64;
    let summands = strided_values(system, x, 1, 1, n_max, f);
    AverageProfile::from_summands(&summands, checkpoints, f.sup_bound())
}

pub(crate) fn check_exponents(a1: i64, a2: i64) -> Result<()> {
    if a1 == 0 || a2 == 0 {
        return Err(argument("exponents a1, a2 must be non-zero"));
    }
    if a1 == a2 {
        return Err(argument(format!("exponents must be distinct (a1 = a2 = {a1})")));
    }
    Ok(())
}

/// Summands `f1(T^{a1 n} x) · f2(T^{a2 n} x)` for `n = 1..=n_max`.
pub(crate) fn bilinear_summands(
    system: &dyn Dynamics,
    f1: &Observable,
    f2: &Observable,
    a1: i64,
    a2: i64,
    x: &State,
    n_max: usize,
) -> Vec<f64> {
    let u = strided_values(system, x, a1, 1, n_max as i64, f1);
    let v = strided_values(system, x, a2, 1, n_max as i64, f2);
    u.iter().zip(&v).map(|(a, b)| a * b).collect()
}

/// `(1/N) Σ_{n=1}^N f1(T^{a1 n} x) f2(T^{a2 n} x)`.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_average(
    system: &dyn Dynamics,
    f1: &Observable,
    f2: &Observable,
    a1: i64,
    a2: i64,
    x: &State,
    checkpoints: &[usize],
) -> Result<AverageProfile> {
    check_exponents(a1, a2)?;
    validate_checkpoints(checkpoints)?;
    let n_max = *checkpoints.last().unwrap();
    let summands = bilinear_summands(system, f1, f2, a1, a2, x, n_max);
    AverageProfile::from_summands(&summands, checkpoints, f1.sup_bound() * f2.sup_bound())
}

/// `(1/N) Σ_{n=1}^N c_n g(S^n y)`.
pub fn weighted_average(
    c: &WeightSequence,
    system_y: &dyn Dynamics,
    g: &Observable,
    y: &State,
    checkpoints: &[usize],
) -> Result<AverageProfile> {
    validate_checkpoints(checkpoints)?;
    let n_max = *checkpoints.last().unwrap();
    if c.len() < n_max {
        return Err(argument(format!(
            "weight has {} terms but the last checkpoint is {n_max}",
            c.len()
        )));
    }
    let summands: Vec<f64> = if let Some(k) = g.is_constant() {
        c.values[..n_max].iter().map(|v| v * k).collect()
    } else {
        let gv = strided_values(system_y, y, 1, 1, n_max as i64, g);
        c.values[..n_max].iter().zip(&gv).map(|(a, b)| a * b).collect()
    };
    AverageProfile::from_summands(&summands, checkpoints, c.bound * g.sup_bound())
}

/// Both sides of the finitary van der Corput inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdcReport {
    /// `‖(1/N) Σ u_n‖²`.
    pub lhs: f64,
    /// `(1 + H/N)·(1/H)·Σ_{|h|<H} (1 − |h|/H)·|(1/N) Σ_n ⟨u_n, u_{n+h}⟩| + (2H/N)·max‖u_n‖²`.
    pub rhs: f64,
    pub h: usize,
    pub n: usize,
    /// `rhs − lhs`.
    pub slack: f64,
}

impl VdcReport {
    pub fn holds(&self) -> bool {
        self.slack >= -1e-9
    }
}

/// Evaluate both sides of the finitary van der Corput inequality for
/// vectors `u_1, …, u_N` and window `1 ≤ H ≤ N`.
///
/// Inner correlations only use pairs with both indices in `[1, N]`. With
/// `u_n = 0` outside that range, averaging `Σ_n u_n` over `H` shifts and
/// applying Cauchy–Schwarz to the `N + H − 1` shifted blocks gives
///
/// `‖Σ u_n‖² ≤ (N + H − 1)/H · Σ_{|h|<H} (1 − |h|/H) Σ_n ⟨u_n, u_{n+h}⟩`,
///
/// which after dividing by `N²` is the stated bound without the final
/// `2H/N·max‖u‖²` term; that term only adds slack. See `docs/vdc.md`.
pub fn vdc_check(u: &[Vec<f64>], h: usize) -> Result<VdcReport> {
    let n = u.len();
    if h == 0 {
        return Err(argument("window H must be at least 1"));
    }
    if h > n {
        return Err(argument(format!(
            "window H = {h} exceeds sequence length N = {n}"
        )));
    }
    let dim = u[0].len();
    if u.iter().any(|v| v.len() != dim) {
        return Err(argument("all vectors must share one dimension"));
    }
    let nf = n as f64;
    let hf = h as f64;
    let lhs: f64 = (0..dim)
        .map(|d| {
            let col: Vec<f64> = u.iter().map(|v| v[d]).collect();
            let m = pairwise_sum(&col) / nf;
            m * m
        })
        .sum();
    let columns: Vec<Vec<f64>> = (0..dim).map(|d| u.iter().map(|v| v[d]).collect()).collect();
    // ⟨u_n, u_{n+h}⟩ summed over n; the same value serves h and −h.
    let corr = |lag: usize| -> f64 {
        columns
            .iter()
            .map(|col| pairwise_dot(&col[..n - lag], &col[lag..]))
            .sum::<f64>()
            / nf
    };
    let mut window = corr(0).abs();
    for lag in 1..h {
        let w = 1.0 - lag as f64 / hf;
        let forward = corr(lag);
        window += w * forward.abs() * 2.0;
    }
    let max_sq = u
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max);
    let rhs = (1.0 + hf / nf) * window / hf + 2.0 * hf / nf * max_sq;
    Ok(VdcReport {
        lhs,
        rhs,
        h,
        n,
        slack: rhs - lhs,
    })
}
