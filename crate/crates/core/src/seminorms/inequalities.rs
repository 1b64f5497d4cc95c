//! Numerical checks of the two seminorm estimates: control of multiple
//! averages by a single seminorm, and the product inequality
//! `‖f⊗g‖_{U^l(T^a×S^b,c)} ≤ |ab|^{1/4} |c|^{1/2^l} ‖f‖_{U^{l+1}(T)} ‖g‖_{U^{l+1}(S)}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimator::seminorm;
use super::{Backend, SeminormEstimate, SeminormParams};
use crate::error::{argument, Result};
use crate::numeric::pairwise_sum;
use crate::rng::SeedStream;
use crate::stats;
use crate::systems::{strided_values, Dynamics, Observable, System, SystemSpec};

/// Seminorm level below which the multiple average is expected to be small.
pub const RHS_SMALL: f64 = 0.02;
/// What "small" means for the multiple average.
pub const LHS_SMALL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilinearReport {
    pub k: usize,
    pub i: usize,
    pub exponents: Vec<i64>,
    /// The seminorm parameter `a_i` (k = 1) or `a_i − a_{i'}`.
    pub c: i64,
    /// `‖(1/N) Σ_{n=1}^N Π_j f_j(T^{a_j n} x)‖_{L²(μ)}`.
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: SeminormEstimate,
    /// `lhs / rhs`, infinite when the seminorm estimate is 0.
    pub ratio: f64,
    /// `rhs ≤ RHS_SMALL` implies `lhs < LHS_SMALL`.
    pub implication_holds: bool,
}

/// Compare `‖(1/N) Σ_n Π_j T^{a_j n} f_j‖_{L²}` with `‖f_i‖_{U^k(T,c)}`.
///
/// The left side is a Monte Carlo `L²` norm over `params.m` draws from `μ`
/// with orbit averages of length `params.n`; the right side uses `params`
/// with its level and `c` replaced.
pub fn check_multilinear_estimate(
    system: &dyn Dynamics,
    fs: &[Observable],
    exponents: &[i64],
    i: usize,
    params: &SeminormParams,
    seed: SeedStream,
) -> Result<MultilinearReport> {
    let k = fs.len();
    if !(1..=3).contains(&k) {
        return Err(argument(format!(
            "between 1 and 3 functions are supported, got {k}"
        )));
    }
    if exponents.len() != k {
        return Err(argument(format!(
            "{k} functions but {} exponents",
            exponents.len()
        )));
    }
    if i >= k {
        return Err(argument(format!("index {i} out of range for {k} functions")));
    }
    if exponents.contains(&0) {
        return Err(argument("exponents must be non-zero"));
    }
    for (j, a) in exponents.iter().enumerate() {
        if exponents[..j].contains(a) {
            return Err(argument(format!("exponent {a} is repeated")));
        }
    }
    let c = if k == 1 {
        exponents[i]
    } else {
        let other = (0..k).find(|&j| j != i).unwrap();
        exponents[i] - exponents[other]
    };

    let n = params.n as i64;
    let squares: Vec<f64> = (0..params.m as u64)
        .into_par_iter()
        .map(|s| {
            let x = system.sample_invariant(&mut seed.fork_named("lhs").fork(s).rng());
            let mut prod = vec![1.0; params.n];
            for (f, &a) in fs.iter().zip(exponents) {
                for (p, v) in prod.iter_mut().zip(strided_values(system, &x, a, 1, n, f)) {
                    *p *= v;
                }
            }
            let avg = pairwise_sum(&prod) / n as f64;
            avg * avg
        })
        .collect();
    let mean_sq = stats::mean(&squares);
    let lhs = mean_sq.sqrt();
    let lhs_stderr = if lhs > 0.0 {
        stats::stderr(&squares) / (2.0 * lhs)
    } else {
        stats::stderr(&squares).sqrt()
    };

    let rhs = seminorm(
        system,
        &fs[i],
        &params.with_level(k as u32, c),
        seed.fork_named("rhs"),
    )?;
    let ratio = if rhs.value > 0.0 {
        lhs / rhs.value
    } else {
        f64::INFINITY
    };
    Ok(MultilinearReport {
        k,
        i,
        exponents: exponents.to_vec(),
        c,
        lhs,
        lhs_stderr,
        implication_holds: rhs.value > RHS_SMALL || lhs < LHS_SMALL,
        rhs,
        ratio,
    })
}

/// Estimator settings for the two sides of the product inequality. Levels
/// and `c` are overwritten; an orbit backend on a non-ergodic system falls
/// back to Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCheckParams {
    pub lhs: SeminormParams,
    pub rhs: SeminormParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub level: u32,
    pub lhs: SeminormEstimate,
    pub f_norm: SeminormEstimate,
    pub g_norm: SeminormEstimate,
    /// `|ab|^{1/4} |c|^{1/2^l}`.
    pub constant: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    /// `lhs ≤ rhs + 3·(combined stderr)`.
    pub holds: bool,
}

fn fit_backend(system: &dyn Dynamics, mut p: SeminormParams) -> SeminormParams {
    if p.backend == Backend::Orbit && !system.declared_ergodic() {
        p.backend = Backend::MonteCarlo;
    }
    if p.backend == Backend::Exact && system.finite_states().is_none() {
        p.backend = Backend::MonteCarlo;
    }
    p
}

/// Estimate both sides of the product inequality for `f` on `X` and `g` on `Y`.
#[allow(clippy::too_many_arguments)]
pub fn check_product_inequality(
    system_x: &System,
    f: &Observable,
    system_y: &System,
    g: &Observable,
    a: i64,
    b: i64,
    c: i64,
    level: u32,
    params: &ProductCheckParams,
    seed: SeedStream,
) -> Result<InequalityReport> {
    if !(1..=2).contains(&level) {
        return Err(argument(format!(
            "product inequality is checked for l ∈ {{1, 2}}, got {level}"
        )));
    }
    if a == 0 || b == 0 || c == 0 {
        return Err(argument("a, b and c must be non-zero"));
    }
    let joint = System::new(&SystemSpec::product(
        SystemSpec::power(system_x.spec().clone(), a),
        SystemSpec::power(system_y.spec().clone(), b),
    ))?;
    let fg = Observable::tensor(vec![f.clone(), g.clone()]);
    let lhs_params = fit_backend(&joint, params.lhs.with_level(level, c));
    let lhs = seminorm(&joint, &fg, &lhs_params, seed.fork_named("lhs"))?;

    let rhs_level = level + 1;
    let px = fit_backend(system_x, params.rhs.with_level(rhs_level, 1));
    let py = fit_backend(system_y, params.rhs.with_level(rhs_level, 1));
    let f_norm = seminorm(system_x, f, &px, seed.fork_named("rhs-f"))?;
    let g_norm = seminorm(system_y, g, &py, seed.fork_named("rhs-g"))?;

    let constant = ((a * b).unsigned_abs() as f64).powf(0.25)
        * (c.unsigned_abs() as f64).powf(1.0 / 2f64.powi(level as i32));
    let rhs = constant * f_norm.value * g_norm.value;
    let rhs_stderr = constant * (f_norm.stderr * g_norm.value + f_norm.value * g_norm.stderr);
    let combined = (lhs.stderr.powi(2) + rhs_stderr.powi(2)).sqrt();
    Ok(InequalityReport {
        a,
        b,
        c,
        level,
        constant,
        rhs,
        rhs_stderr,
        slack: rhs - lhs.value,
        holds: lhs.value <= rhs + 3.0 * combined + 1e-12,
        lhs,
        f_norm,
        g_norm,
    })
}
