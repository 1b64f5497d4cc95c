use rayon::prelude::*;

use super::sweep::lagged_products;
use super::{Backend, SeminormEstimate, SeminormParams};
use crate::error::{unsupported, Result};
use crate::numeric::{gcd, pairwise_dot, pairwise_sum};
use crate::rng::SeedStream;
use crate::stats;
use crate::systems::{strided_values, Dynamics, Observable, State};

/// Estimate `‖f‖_{U^l(T,c)}` with the backend selected in `params`.
pub fn seminorm(
    system: &dyn Dynamics,
    f: &Observable,
    params: &SeminormParams,
    seed: SeedStream,
) -> Result<SeminormEstimate> {
    params.validate()?;
    match params.backend {
        Backend::Orbit => {
            if !system.declared_ergodic() {
                return Err(unsupported(format!(
                    "the orbit backend needs an ergodic system; {} is not declared ergodic",
                    system.label()
                )));
            }
            Ok(orbit_backend(system, f, params, seed))
        }
        Backend::MonteCarlo => Ok(monte_carlo_backend(system, f, params, seed)),
        Backend::Exact => exact_backend(system, f, params),
    }
}

/// A finite stretch `g(start), g(start + 1), …` of a sequence indexed by time.
#[derive(Debug, Clone)]
struct Seq {
    start: i64,
    vals: Vec<f64>,
}

impl Seq {
    fn end(&self) -> i64 {
        self.start + self.vals.len() as i64
    }

    fn index(&self, n: i64) -> usize {
        (n - self.start) as usize
    }

    /// `n ↦ g(n)·g(n + h)` on the times where both factors are known.
    fn delta(&self, h: i64) -> Seq {
        let lo = self.start + (-h).max(0);
        let hi = self.end() - h.max(0);
        let vals = (lo..hi)
            .map(|n| {
                let i = self.index(n);
                self.vals[i] * self.vals[(i as i64 + h) as usize]
            })
            .collect();
        Seq { start: lo, vals }
    }
}

fn batch_bounds(n: usize, batches: usize) -> Vec<(usize, usize)> {
    (0..batches)
        .map(|b| (b * n / batches, (b + 1) * n / batches))
        .filter(|(lo, hi)| hi > lo)
        .collect()
}

/// Symmetric window mean of `per_h` (indexed by `h + H`) for each truncation.
fn window_means(per_h: &[f64], h_max: usize, schedule: &[usize]) -> Vec<f64> {
    schedule
        .iter()
        .map(|&h| pairwise_sum(&per_h[h_max - h..=h_max + h]) / (2 * h + 1) as f64)
        .collect()
}

struct OrbitCtx<'a> {
    n: usize,
    c_abs: usize,
    hs: &'a [usize],
    batches: Vec<(usize, usize)>,
}

impl OrbitCtx<'_> {
    /// Per-batch `(1/(2H+1)) Σ_{|k|≤H} (1/N_b) Σ_{n∈b} g(n) g(n + ck)` using
    /// strided prefix sums for the window sum over `k`.
    fn u1_batches(&self, g: &Seq) -> Vec<f64> {
        let h1 = self.hs[0];
        let step = self.c_abs;
        let len = g.vals.len();
        let mut prefix = vec![0.0; len];
        for i in 0..len {
            prefix[i] = g.vals[i] + if i >= step { prefix[i - step] } else { 0.0 };
        }
        let reach = step * h1;
        let first = g.index(0);
        let window: Vec<f64> = (0..self.n)
            .map(|n| {
                let i = first + n;
                let upper = prefix[i + reach];
                let lower = if i >= reach + step {
                    prefix[i - reach - step]
                } else {
                    0.0
                };
                upper - lower
            })
            .collect();
        let norm = (2 * h1 + 1) as f64;
        self.batches
            .iter()
            .map(|&(lo, hi)| {
                pairwise_dot(&g.vals[first + lo..first + hi], &window[lo..hi]) / (hi - lo) as f64 / norm
            })
            .collect()
    }

    /// Average over the shift windows of levels `2..=depth` below the outer one.
    fn inner(&self, g: &Seq, depth: usize) -> Vec<f64> {
        if depth == 1 {
            return self.u1_batches(g);
        }
        let h = self.hs[depth - 1] as i64;
        let mut acc = vec![0.0; self.batches.len()];
        for shift in -h..=h {
            for (a, v) in acc.iter_mut().zip(self.inner(&g.delta(shift), depth - 1)) {
                *a += v;
            }
        }
        let norm = (2 * h + 1) as f64;
        acc.iter().map(|a| a / norm).collect()
    }
}

fn orbit_backend(
    system: &dyn Dynamics,
    f: &Observable,
    params: &SeminormParams,
    seed: SeedStream,
) -> SeminormEstimate {
    let level = params.level as usize;
    let hs = &params.h_schedule;
    let c_abs = params.c.unsigned_abs() as usize;
    let n = params.n;
    let margin = (c_abs * hs[0] + hs[1..].iter().sum::<usize>()) as i64;
    let x = system.sample_invariant(&mut seed.fork_named("orbit-start").rng());
    let base = Seq {
        start: -margin,
        vals: strided_values(system, &x, 1, -margin, n as i64 - 1 + margin, f),
    };
    let ctx = OrbitCtx {
        n,
        c_abs,
        hs,
        batches: batch_bounds(n, params.batches),
    };
    let schedule = params.top_schedule();
    let top = *hs.last().unwrap();

    // per_batch[b][s]: estimate of the power on batch b at truncation schedule[s]
    let per_batch: Vec<Vec<f64>> = if level == 1 {
        level_one_batches(&base, &ctx, &schedule)
    } else {
        let outer: Vec<Vec<f64>> = (-(top as i64)..=top as i64)
            .into_par_iter()
            .map(|h| ctx.inner(&base.delta(h), level - 1))
            .collect();
        (0..ctx.batches.len())
            .map(|b| {
                let col: Vec<f64> = outer.iter().map(|v| v[b]).collect();
                window_means(&col, top, &schedule)
            })
            .collect()
    };

    let weights: Vec<f64> = ctx
        .batches
        .iter()
        .map(|(lo, hi)| (hi - lo) as f64 / n as f64)
        .collect();
    let trace: Vec<(usize, f64)> = schedule
        .iter()
        .enumerate()
        .map(|(s, &h)| {
            let terms: Vec<f64> = per_batch.iter().zip(&weights).map(|(p, w)| p[s] * w).collect();
            (h, pairwise_sum(&terms))
        })
        .collect();
    let last: Vec<f64> = per_batch.iter().map(|p| *p.last().unwrap()).collect();
    SeminormEstimate::from_power_trace(params, trace, stats::stderr(&last))
}

/// Level one: correlation form with forward and backward lags computed from
/// the orbit separately (backward lags through the reversed buffer).
fn level_one_batches(base: &Seq, ctx: &OrbitCtx<'_>, schedule: &[usize]) -> Vec<Vec<f64>> {
    let reach = ctx.c_abs * ctx.hs[0];
    let first = base.index(0);
    let total = base.vals.len();
    let reversed: Vec<f64> = base.vals.iter().rev().copied().collect();
    ctx.batches
        .iter()
        .map(|&(lo, hi)| {
            let a = &base.vals[first + lo..first + hi];
            let fwd = lagged_products(a, &base.vals[first + lo..first + hi + reach], reach);
            let r_lo = total - (first + hi);
            let r_hi = total - (first + lo);
            let bwd = lagged_products(&reversed[r_lo..r_hi], &reversed[r_lo..r_hi + reach], reach);
            debug_assert!((fwd[0] - bwd[0]).abs() <= 1e-9 * (1.0 + fwd[0].abs()));
            let nb = (hi - lo) as f64;
            let mut per_k = vec![0.0; 2 * ctx.hs[0] + 1];
            let h1 = ctx.hs[0];
            per_k[h1] = fwd[0] / nb;
            for k in 1..=h1 {
                per_k[h1 + k] = fwd[ctx.c_abs * k] / nb;
                per_k[h1 - k] = bwd[ctx.c_abs * k] / nb;
            }
            window_means(&per_k, h1, schedule)
        })
        .collect()
}

fn monte_carlo_backend(
    system: &dyn Dynamics,
    f: &Observable,
    params: &SeminormParams,
    seed: SeedStream,
) -> SeminormEstimate {
    let level = params.level as usize;
    let hs = &params.h_schedule;
    let c = params.c;
    let n = params.n as i64;
    let s_rec = hs[1..].iter().sum::<usize>() as i64;
    let t_lo = (c * (n - 1)).min(0) - s_rec;
    let t_hi = (c * (n - 1)).max(0) + s_rec;
    let schedule: Vec<usize> = if level == 1 {
        vec![0]
    } else {
        params.top_schedule()
    };
    let top = *hs.last().unwrap();

    let orbit_average_sq = |g: &Seq| -> f64 {
        let vals: Vec<f64> = (0..n).map(|k| g.vals[g.index(c * k)]).collect();
        let a = pairwise_sum(&vals) / n as f64;
        a * a
    };
    fn inner(g: &Seq, depth: usize, hs: &[usize], leaf: &dyn Fn(&Seq) -> f64) -> f64 {
        if depth == 1 {
            return leaf(g);
        }
        let h = hs[depth - 1] as i64;
        let terms: Vec<f64> = (-h..=h)
            .map(|s| inner(&g.delta(s), depth - 1, hs, leaf))
            .collect();
        pairwise_sum(&terms) / (2 * h + 1) as f64
    }

    let samples: Vec<Vec<f64>> = (0..params.m as u64)
        .into_par_iter()
        .map(|i| {
            let x: State = system.sample_invariant(&mut seed.fork(i).rng());
            let base = Seq {
                start: t_lo,
                vals: strided_values(system, &x, 1, t_lo, t_hi, f),
            };
            if level == 1 {
                return vec![orbit_average_sq(&base)];
            }
            let per_h: Vec<f64> = (-(top as i64)..=top as i64)
                .map(|h| inner(&base.delta(h), level - 1, hs, &orbit_average_sq))
                .collect();
            window_means(&per_h, top, &schedule)
        })
        .collect();

    let trace: Vec<(usize, f64)> = schedule
        .iter()
        .enumerate()
        .map(|(s, &h)| {
            let col: Vec<f64> = samples.iter().map(|v| v[s]).collect();
            (h, stats::mean(&col))
        })
        .collect();
    let last: Vec<f64> = samples.iter().map(|v| *v.last().unwrap()).collect();
    SeminormEstimate::from_power_trace(params, trace, stats::stderr(&last))
}

/// Relative size below which an exact-backend power is treated as 0.
const EXACT_ROUNDOFF: f64 = 1e-13;

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn exact_backend(system: &dyn Dynamics, f: &Observable, params: &SeminormParams) -> Result<SeminormEstimate> {
    let states = system.finite_states().ok_or_else(|| {
        unsupported(format!(
            "the exact backend needs a finite system; {} is not",
            system.label()
        ))
    })?;
    let size = states.len();
    let succ: Vec<usize> = states
        .iter()
        .map(|s| {
            let t = system.jump(s, 1);
            states
                .iter()
                .position(|u| *u == t)
                .expect("finite system is closed under T")
        })
        .collect();
    let mut period = 1u64;
    let mut seen = vec![false; size];
    for i in 0..size {
        if seen[i] {
            continue;
        }
        let mut len = 0u64;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = succ[j];
            len += 1;
        }
        period = lcm(period, len);
    }
    let ord = period as usize;
    let mut shifts: Vec<Vec<usize>> = vec![(0..size).collect()];
    for h in 1..ord {
        let prev = &shifts[h - 1];
        shifts.push(prev.iter().map(|&i| succ[i]).collect());
    }
    let fvals: Vec<f64> = states.iter().map(|s| f.eval(s)).collect();
    let c = params.c;

    fn power(g: &[f64], depth: usize, c: i64, ord: usize, shifts: &[Vec<usize>]) -> f64 {
        let size = g.len() as f64;
        if depth == 1 {
            let terms: Vec<f64> = (0..ord as i64)
                .map(|k| {
                    let sh = &shifts[(c * k).rem_euclid(ord as i64) as usize];
                    g.iter().zip(sh).map(|(a, &j)| a * g[j]).sum::<f64>() / size
                })
                .collect();
            return pairwise_sum(&terms) / ord as f64;
        }
        let terms: Vec<f64> = (0..ord)
            .map(|h| {
                let prod: Vec<f64> = g.iter().zip(&shifts[h]).map(|(a, &j)| a * g[j]).collect();
                power(&prod, depth - 1, c, ord, shifts)
            })
            .collect();
        pairwise_sum(&terms) / ord as f64
    }

    let p = power(&fvals, params.level as usize, c, ord, &shifts);
    // Exact zeros come out as ±1e-33-sized residues, which the 2^l-th root
    // would magnify to ~1e-8.
    let scale = f.sup_bound().powi(1 << params.level);
    let p = if p.abs() <= EXACT_ROUNDOFF * scale { 0.0 } else { p };
    Ok(SeminormEstimate::from_power_trace(params, vec![(ord, p)], 0.0))
}
