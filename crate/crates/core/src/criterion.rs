//! Weights built from two-point orbit data and the BFKO orthogonality
//! criterion: the sets `S_{δ,N}`, `S_{δ,L,R}`, their lower densities, the
//! cutoff `η_δ` and the product `F_{x,L,R}`.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averages::{bilinear_summands, check_exponents};
use crate::error::{argument, config, Result};
use crate::numeric::pairwise_sum;
use crate::seminorms::autocorrelation_sweep;
use crate::systems::{Dynamics, Observable, State};

/// Default threshold: the criterion passes at `criterion_value ≥ 1 − tol`.
pub const DEFAULT_TOL: f64 = 0.05;
pub const DEFAULT_DELTAS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

/// Where a weight came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Orbit {
        system: String,
        x: State,
        f1: String,
        f2: String,
        a1: i64,
        a2: i64,
    },
    External,
}

/// A bounded real sequence `c_1, c_2, …` (`values[0]` is `c_1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub values: Vec<f64>,
    pub bound: f64,
    pub provenance: Provenance,
}

impl WeightSequence {
    /// A weight from raw values; every value must be finite and within `bound`.
    pub fn external(values: Vec<f64>, bound: f64) -> Result<WeightSequence> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(argument(format!("invalid weight bound {bound}")));
        }
        if let Some((n, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > bound)
        {
            return Err(argument(format!(
                "weight value c_{} = {v} exceeds bound {bound}",
                n + 1
            )));
        }
        Ok(WeightSequence {
            values,
            bound,
            provenance: Provenance::External,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `λ·c` with bound `|λ|·bound`.
    pub fn scaled(&self, lambda: f64) -> WeightSequence {
        WeightSequence {
            values: self.values.iter().map(|v| v * lambda).collect(),
            bound: self.bound * lambda.abs(),
            provenance: self.provenance.clone(),
        }
    }

    /// Two-column CSV `n,value` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }

    /// Parse the CSV written by [`WeightSequence::to_csv`]. Without an
    /// explicit bound, the largest absolute value is used.
    pub fn from_csv(text: &str, bound: Option<f64>) -> Result<WeightSequence> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("n,value") => {}
            other => {
                return Err(config(format!(
                    "weight CSV must start with `n,value`, found {other:?}"
                )))
            }
        }
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let (n, v) = line
                .split_once(',')
                .ok_or_else(|| config(format!("line {}: expected `n,value`", k + 2)))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| config(format!("line {}: bad index {n:?}", k + 2)))?;
            if n != k + 1 {
                return Err(config(format!(
                    "line {}: expected index {}, found {n}",
                    k + 2,
                    k + 1
                )));
            }
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| config(format!("line {}: bad value {v:?}", k + 2)))?;
            values.push(v);
        }
        let bound = bound.unwrap_or_else(|| values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
        WeightSequence::external(values, bound)
    }
}

/// `c_n = f1(T^{a1 n} x) · f2(T^{a2 n} x)` for `n = 1..=n_total`.
pub fn make_weight(
    system: &dyn Dynamics,
    f1: &Observable,
    f2: &Observable,
    a1: i64,
    a2: i64,
    x: &State,
    n_total: usize,
) -> Result<WeightSequence> {
    check_exponents(a1, a2)?;
    if n_total == 0 {
        return Err(argument("weight length must be at least 1"));
    }
    Ok(WeightSequence {
        values: bilinear_summands(system, f1, f2, a1, a2, x, n_total),
        bound: f1.sup_bound() * f2.sup_bound(),
        provenance: Provenance::Orbit {
            system: system.label(),
            x: x.clone(),
            f1: f1.name().to_string(),
            f2: f2.name().to_string(),
            a1,
            a2,
        },
    })
}

/// `γ_N(h) = (1/N) Σ_{n=1}^N c_n c_{n+h}` for `N` in `n_list`, `h = 0..=h_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub n_list: Vec<usize>,
    pub h_max: usize,
    /// `gamma[i][h]` belongs to `n_list[i]`.
    pub gamma: Vec<Vec<f64>>,
    pub bound: f64,
}

impl CorrelationTable {
    fn row(&self, n: usize) -> Option<&[f64]> {
        self.n_list
            .iter()
            .position(|&m| m == n)
            .map(|i| self.gamma[i].as_slice())
    }

    /// Rows whose `N` lies in `[l, r]`.
    fn rows_in(&self, l: usize, r: usize) -> Vec<&[f64]> {
        self.n_list
            .iter()
            .zip(&self.gamma)
            .filter(|(&n, _)| l <= n && n <= r)
            .map(|(_, g)| g.as_slice())
            .collect()
    }
}

pub fn correlation_table(c: &WeightSequence, n_list: &[usize], h_max: usize) -> Result<CorrelationTable> {
    if n_list.is_empty() {
        return Err(argument("empty N list"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(argument("N list must be positive and strictly increasing"));
    }
    let n_max = *n_list.last().unwrap();
    if n_max + h_max > c.len() {
        return Err(argument(format!(
            "window overrun: N_max + H_max = {} exceeds the {} weight terms",
            n_max + h_max,
            c.len()
        )));
    }
    let gamma = n_list
        .par_iter()
        .map(|&n| autocorrelation_sweep(&c.values, h_max, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationTable {
        n_list: n_list.to_vec(),
        h_max,
        gamma,
        bound: c.bound,
    })
}

fn check_window(table: &CorrelationTable, delta: f64, l: usize, r: usize, horizon: usize) -> Result<()> {
    if !(delta > 0.0) {
        return Err(argument(format!("δ must be positive, got {delta}")));
    }
    if l > r {
        return Err(argument(format!("L = {l} exceeds R = {r}")));
    }
    if table.row(l).is_none() || table.row(r).is_none() {
        return Err(argument(format!(
            "L = {l} and R = {r} must both be in the N list"
        )));
    }
    if horizon == 0 || horizon > table.h_max {
        return Err(argument(format!(
            "horizon {horizon} must lie in [1, {}]",
            table.h_max
        )));
    }
    Ok(())
}

/// `min_{M ∈ [horizon/2, horizon]} (1/M) Σ_{h ≤ M} w(h)`, with `w` indexed from `h = 1`.
fn tail_min_density(w: &[f64]) -> f64 {
    let horizon = w.len();
    let from = (horizon / 2).max(1);
    let mut acc = 0.0;
    let mut best = f64::INFINITY;
    for (i, v) in w.iter().enumerate() {
        acc += v;
        let m = i + 1;
        if m >= from {
            best = best.min(acc / m as f64);
        }
    }
    best
}

/// `S_{δ,L,R} = {h ∈ [1, horizon] : |γ_N(h)| < δ for every tabulated N ∈ [L, R]}`
/// and its lower density, approximated by the minimum of `|S ∩ [1,M]|/M`
/// over `M ∈ [horizon/2, horizon]`.
pub fn s_set_density(
    table: &CorrelationTable,
    delta: f64,
    l: usize,
    r: usize,
    horizon: usize,
) -> Result<(Vec<usize>, f64)> {
    check_window(table, delta, l, r, horizon)?;
    let rows = table.rows_in(l, r);
    let member: Vec<bool> = (1..=horizon)
        .map(|h| rows.iter().all(|g| g[h].abs() < delta))
        .collect();
    let set: Vec<usize> = (1..=horizon).filter(|&h| member[h - 1]).collect();
    let w: Vec<f64> = member.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    Ok((set, tail_min_density(&w)))
}

/// The same density proxy with the indicator of `S_{δ,L,R}` replaced by
/// `Π_N η_δ(γ_N(h))`. Never exceeds the indicator density.
pub fn smoothed_density(
    table: &CorrelationTable,
    delta: f64,
    l: usize,
    r: usize,
    horizon: usize,
) -> Result<f64> {
    check_window(table, delta, l, r, horizon)?;
    let rows = table.rows_in(l, r);
    let w: Vec<f64> = (1..=horizon)
        .map(|h| rows.iter().map(|g| eta_cutoff(g[h], delta)).product())
        .collect();
    Ok(tail_min_density(&w))
}

/// Piecewise-linear cutoff: 1 on `[−δ/2, δ/2]`, 0 outside `(−δ, δ)`, linear between.
pub fn eta_cutoff(t: f64, delta: f64) -> f64 {
    ((delta - t.abs()) / (0.5 * delta)).clamp(0.0, 1.0)
}

/// Roughly `per_decade` geometrically spaced integers in `[l, r]`, always
/// containing both ends.
pub fn geometric_grid(l: usize, r: usize, per_decade: usize) -> Vec<usize> {
    let mut out = BTreeSet::from([l, r]);
    if l >= 1 && r > l && per_decade > 0 {
        let ratio = 10f64.powf(1.0 / per_decade as f64);
        let mut x = l as f64;
        while x < r as f64 {
            out.insert(x.round() as usize);
            x *= ratio;
        }
    }
    out.into_iter().filter(|&n| l <= n && n <= r).collect()
}

/// `Π_{N ∈ n_list} η_δ((1/N) Σ_{n ≤ N} cx_n · cxi_n)` over an `N`-subgrid of `[L, R]`.
pub fn f_xlr(
    cx: &WeightSequence,
    cxi: &WeightSequence,
    l: usize,
    r: usize,
    delta: f64,
    n_list: &[usize],
) -> Result<f64> {
    if cx.len() != cxi.len() {
        return Err(argument(format!(
            "misaligned weights: {} vs {} terms",
            cx.len(),
            cxi.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(argument(format!("δ must be positive, got {delta}")));
    }
    if l == 0 || l > r || r > cx.len() {
        return Err(argument(format!(
            "[L, R] = [{l}, {r}] must lie in [1, {}]",
            cx.len()
        )));
    }
    if n_list.iter().any(|&n| n < l || n > r) {
        return Err(argument("every N must lie in [L, R]"));
    }
    let prod: Vec<f64> = cx.values.iter().zip(&cxi.values).map(|(a, b)| a * b).collect();
    Ok(n_list
        .iter()
        .map(|&n| eta_cutoff(pairwise_sum(&prod[..n]) / n as f64, delta))
        .product())
}

/// `(L, R)` pairs with `L ∈ {10², 10³, 10⁴}` and `R ∈ {L, 10L, 100L}`,
/// restricted to `L ≤ n_max` and capped at `n_max`.
pub fn default_schedule(n_max: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for l in [100usize, 1_000, 10_000] {
        if l > n_max {
            continue;
        }
        for r in [l, 10 * l, 100 * l] {
            let pair = (l, r.min(n_max));
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    if out.is_empty() {
        out.push((n_max, n_max));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    pub delta_grid: Vec<f64>,
    pub schedule: Vec<(usize, usize)>,
    pub horizon: usize,
    pub tol: f64,
    /// Density of the `N`-grid inside each `[L, R]`.
    pub per_decade: usize,
}

impl CriterionConfig {
    /// Default grids for a weight with `n_max + horizon` usable terms.
    pub fn new(n_max: usize, horizon: usize) -> Self {
        CriterionConfig {
            delta_grid: DEFAULT_DELTAS.to_vec(),
            schedule: default_schedule(n_max),
            horizon,
            tol: DEFAULT_TOL,
            per_decade: 10,
        }
    }

    pub fn n_list(&self) -> Vec<usize> {
        let mut all = BTreeSet::new();
        for &(l, r) in &self.schedule {
            all.extend(geometric_grid(l, r, self.per_decade));
        }
        all.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEntry {
    pub delta: f64,
    pub l: usize,
    pub r: usize,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub delta_grid: Vec<f64>,
    pub schedule: Vec<(usize, usize)>,
    pub n_list: Vec<usize>,
    pub horizon: usize,
    pub densities: Vec<DensityEntry>,
    /// Per δ: minimum density over `R` at the largest `L`.
    pub per_delta: Vec<f64>,
    pub criterion_value: f64,
    pub tol: f64,
    pub pass: bool,
    /// Densities never increase with `R` for fixed `(δ, L)`.
    pub monotone_in_r: bool,
    /// Densities never decrease with `L` for fixed `(δ, R)`.
    pub monotone_in_l: bool,
    pub note: String,
}

/// Finite proxy of `inf_δ lim_L inf_{R ≥ L} d̲(S_{δ,L,R}(c))`.
pub fn bfko_report(c: &WeightSequence, cfg: &CriterionConfig) -> Result<CriterionReport> {
    if cfg.delta_grid.is_empty() || cfg.schedule.is_empty() {
        return Err(argument("δ grid and (L, R) schedule must be non-empty"));
    }
    let n_list = cfg.n_list();
    let table = correlation_table(c, &n_list, cfg.horizon)?;
    let mut densities = Vec::new();
    for &delta in &cfg.delta_grid {
        for &(l, r) in &cfg.schedule {
            let (_, density) = s_set_density(&table, delta, l, r, cfg.horizon)?;
            densities.push(DensityEntry { delta, l, r, density });
        }
    }
    let l_last = cfg.schedule.iter().map(|p| p.0).max().unwrap();
    let per_delta: Vec<f64> = cfg
        .delta_grid
        .iter()
        .map(|&d| {
            densities
                .iter()
                .filter(|e| e.delta == d && e.l == l_last)
                .map(|e| e.density)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let criterion_value = per_delta.iter().copied().fold(f64::INFINITY, f64::min);

    let pairs = |same: &dyn Fn(&DensityEntry, &DensityEntry) -> bool| {
        densities.iter().all(|a| {
            densities
                .iter()
                .filter(|b| same(a, b))
                .all(|b| b.density <= a.density + 1e-15)
        })
    };
    let monotone_in_r = pairs(&|a, b| a.delta == b.delta && a.l == b.l && b.r > a.r);
    let monotone_in_l = pairs(&|a, b| a.delta == b.delta && a.r == b.r && b.l < a.l);

    Ok(CriterionReport {
        delta_grid: cfg.delta_grid.clone(),
        schedule: cfg.schedule.clone(),
        n_list,
        horizon: cfg.horizon,
        densities,
        per_delta,
        criterion_value,
        tol: cfg.tol,
        pass: criterion_value >= 1.0 - cfg.tol,
        monotone_in_r,
        monotone_in_l,
        note: "R ranges over the configured extensions of L, capped at the available data; \
               lower density is the minimum of |S ∩ [1, M]|/M over M in [horizon/2, horizon]"
            .to_string(),
    })
}
