//! Uniformity seminorms `U^l(X, μ, T, c)`.
//!
//! `‖f‖_{U^1(T,c)} = ‖E(f | I_{T^c})‖_{L²}` and
//! `‖f‖_{U^{l+1}(T,c)}^{2^{l+1}} = limsup_H (1/(2H+1)) Σ_{|h|≤H} ‖f·T^h f‖_{U^l(T,c)}^{2^l}`.
//! Note that only the innermost level sees `T^c`; the recursion shifts by `T`.
//!
//! Three backends estimate the `2^l`-th power:
//!
//! * `orbit`: one generic orbit of an ergodic system; the `U^1` level uses
//!   the correlation form `(1/(2H+1)) Σ_{|k|≤H} ⟨T^{ck} g, g⟩`;
//! * `monte_carlo`: i.i.d. starting points from `μ`; the `U^1` level is the
//!   mean of squared `T^c`-orbit averages, which also covers non-ergodic
//!   systems;
//! * `exact`: finite systems with uniform measure, where every Cesàro limit
//!   is a mean over one period.

mod estimator;
mod inequalities;
mod sweep;

pub use estimator::seminorm;
pub use inequalities::{
    check_multilinear_estimate, check_product_inequality, InequalityReport, MultilinearReport,
    ProductCheckParams,
};
pub use sweep::{autocorrelation_sweep, lagged_products, lagged_products_fft, lagged_products_naive};

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Orbit,
    MonteCarlo,
    Exact,
}

/// Default level-3 cost caps.
pub const LEVEL3_MAX_N: usize = 100_000;
pub const LEVEL3_MAX_H: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormParams {
    pub level: u32,
    pub c: i64,
    /// Truncations, one per level: entry 0 is the window of the `U^1`
    /// correlation form, entry `j` the shift window of level `j + 1`.
    pub h_schedule: Vec<usize>,
    /// Orbit length (orbit backend) or orbit-average length (Monte Carlo).
    pub n: usize,
    /// Monte Carlo sample count.
    #[serde(default = "default_m")]
    pub m: usize,
    pub backend: Backend,
    /// Contiguous batches of the orbit used for the standard error.
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Increasing truncations of the outermost window at which the estimate
    /// is also reported; the last must equal the outermost entry of
    /// `h_schedule`. Empty means `{H/16, H/4, H}`.
    #[serde(default)]
    pub limsup_schedule: Vec<usize>,
}

fn default_m() -> usize {
    256
}

fn default_batches() -> usize {
    8
}

impl SeminormParams {
    /// Same truncation `h` at every level.
    pub fn new(level: u32, c: i64, h: usize, n: usize, backend: Backend) -> Self {
        SeminormParams {
            level,
            c,
            h_schedule: vec![h; level as usize],
            n,
            m: default_m(),
            backend,
            batches: default_batches(),
            limsup_schedule: Vec::new(),
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_level(&self, level: u32, c: i64) -> Self {
        let mut p = self.clone();
        let h = *self.h_schedule.last().unwrap_or(&1);
        p.h_schedule.resize(level as usize, h);
        p.level = level;
        p.c = c;
        p.limsup_schedule.clear();
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.level == 0 {
            return Err(argument("seminorm level must be at least 1"));
        }
        if self.c == 0 {
            return Err(argument("seminorm parameter c must be non-zero"));
        }
        if self.h_schedule.len() != self.level as usize {
            return Err(argument(format!(
                "h_schedule has {} entries, level {} needs {}",
                self.h_schedule.len(),
                self.level,
                self.level
            )));
        }
        if self.h_schedule.contains(&0) {
            return Err(argument("every truncation H must be at least 1"));
        }
        if self.n == 0 {
            return Err(argument("orbit length N must be at least 1"));
        }
        if self.backend == Backend::MonteCarlo && self.m < 2 {
            return Err(argument("Monte Carlo needs at least 2 samples"));
        }
        if self.backend == Backend::Orbit && (self.batches == 0 || self.batches > self.n) {
            return Err(argument("batches must lie in [1, N]"));
        }
        if !self.limsup_schedule.is_empty() {
            if self.limsup_schedule.windows(2).any(|w| w[0] >= w[1]) {
                return Err(argument("limsup schedule must be strictly increasing"));
            }
            if self.limsup_schedule.last() != self.h_schedule.last() || self.limsup_schedule[0] == 0 {
                return Err(argument(
                    "limsup schedule must be positive and end at the outermost truncation",
                ));
            }
        }
        Ok(())
    }

    /// Level-3 cost caps.
    pub fn within_cost_caps(&self) -> bool {
        self.level < 3 || (self.n <= LEVEL3_MAX_N && self.h_schedule.iter().all(|&h| h <= LEVEL3_MAX_H))
    }

    pub(crate) fn top_schedule(&self) -> Vec<usize> {
        if !self.limsup_schedule.is_empty() {
            return self.limsup_schedule.clone();
        }
        let h = *self.h_schedule.last().unwrap();
        let mut s: Vec<usize> = [h / 16, h / 4, h].into_iter().filter(|&x| x >= 1).collect();
        s.dedup();
        s
    }
}

/// An estimate of `‖f‖_{U^l(T,c)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub level: u32,
    pub c: i64,
    pub value: f64,
    /// Combined uncertainty of `value`: sampling error and the change of the
    /// estimate between the last two outer truncations.
    pub stderr: f64,
    /// Estimate of `‖f‖^{2^l}` before clamping.
    pub power: f64,
    pub power_stderr: f64,
    /// `|P(H_last) − P(H_prev)|` in the power domain.
    pub h_spread: f64,
    /// `(H, value)` along the outer truncation schedule.
    pub trace: Vec<(usize, f64)>,
    /// The power estimate was negative within noise and was clamped to 0.
    pub clamped: bool,
    pub params: SeminormParams,
}

impl SeminormEstimate {
    pub(crate) fn from_power_trace(params: &SeminormParams, trace: Vec<(usize, f64)>, se: f64) -> Self {
        let m = 2f64.powi(params.level as i32);
        let (_, power) = *trace.last().expect("non-empty trace");
        let h_spread = if trace.len() >= 2 {
            (trace[trace.len() - 1].1 - trace[trace.len() - 2].1).abs()
        } else {
            0.0
        };
        let clamped = power < 0.0;
        let p = power.max(0.0);
        let value = p.powf(1.0 / m);
        let unc = (se * se + h_spread * h_spread).sqrt();
        let stderr = (p + unc).powf(1.0 / m) - value;
        SeminormEstimate {
            level: params.level,
            c: params.c,
            value,
            stderr,
            power,
            power_stderr: se,
            h_spread,
            trace: trace
                .into_iter()
                .map(|(h, pw)| (h, pw.max(0.0).powf(1.0 / m)))
                .collect(),
            clamped,
            params: params.clone(),
        }
    }
}
