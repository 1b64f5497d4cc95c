//! One runner per experiment. Each returns the files to write and the list
//! of violated invariants; nothing touches the disk here.

use ergolab::averages::{default_checkpoints, vdc_check, weighted_average, AverageProfile};
use ergolab::criterion::{bfko_report, make_weight, CriterionConfig, CriterionReport, WeightSequence};
use ergolab::extension::{generic_point_check, joining_decay, TildeMuSampler};
use ergolab::seminorms::{seminorm, Backend, SeminormParams};
use ergolab::{Dynamics, Observable, SeedStream, State, System};
use rand::Rng;
use serde::Serialize;

use crate::config::{required, Config, Experiment};
use crate::Failure;

/// Work caps, in elementary orbit evaluations. `--force` lifts them.
const SEMINORM_WORK_CAP: f64 = 3e10;
const WEIGHT_LENGTH_CAP: usize = 2_000_000;
const RTT_WORK_CAP: usize = 1_000_000_000;
const EXTENSION_WORK_CAP: usize = 1_000_000_000;
const GENERIC_SIZE_CAP: usize = 10_000_000;
const VDC_WORK_CAP: usize = 10_000_000_000;

/// Samples on which the joining relation is re-checked.
const RELATION_SAMPLES: u64 = 100;
const RELATION_TOL: f64 = 1e-9;

pub struct Output {
    pub files: Vec<(String, String)>,
    pub violations: Vec<String>,
}

pub fn run(exp: Experiment, cfg: &Config, seed: u64, force: bool) -> Result<Output, Failure> {
    let seed = SeedStream::new(seed);
    match exp {
        Experiment::Seminorm => run_seminorm(cfg, seed, force),
        Experiment::Criterion => run_criterion(cfg, seed, force),
        Experiment::Rtt => run_rtt(cfg, seed, force),
        Experiment::Vdc => run_vdc(cfg, seed, force),
        Experiment::Extension => run_extension(cfg, seed, force),
        Experiment::Generic => run_generic(cfg, seed, force),
    }
}

fn refuse(exp: Experiment, what: String) -> Failure {
    Failure::Config(format!(
        "experiment `{}` exceeds the cost cap ({what}); pass --force to run anyway",
        exp.name()
    ))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn system(cfg: &Config, exp: Experiment) -> Result<System, Failure> {
    Ok(System::new(&required(&cfg.system, "system", exp)?)?)
}

fn seminorm_params(cfg: &Config) -> SeminormParams {
    let level = cfg.level.unwrap_or(2);
    let mut p = SeminormParams::new(
        level,
        cfg.c.unwrap_or(1),
        cfg.h.unwrap_or(256),
        cfg.n.unwrap_or(100_000),
        cfg.backend.unwrap_or(Backend::Orbit),
    );
    if let Some(s) = &cfg.h_schedule {
        p.h_schedule = s.clone();
    }
    if let Some(s) = &cfg.limsup_schedule {
        p.limsup_schedule = s.clone();
    }
    if let Some(m) = cfg.m {
        p.m = m;
    }
    if let Some(b) = cfg.batches {
        p.batches = b;
    }
    p
}

/// Orbit evaluations of a seminorm estimate: `N` per base correlation, one
/// per shift combination of the outer levels, `M` times over for Monte Carlo.
fn seminorm_work(p: &SeminormParams) -> f64 {
    let outer: f64 = p.h_schedule.iter().skip(1).map(|&h| (2 * h + 1) as f64).product();
    let per = p.n as f64 * outer;
    match p.backend {
        Backend::MonteCarlo => per * p.m as f64,
        _ => per,
    }
}

fn run_seminorm(cfg: &Config, seed: SeedStream, force: bool) -> Result<Output, Failure> {
    let exp = Experiment::Seminorm;
    let sys = system(cfg, exp)?;
    let f = Observable::on(&required(&cfg.observable, "observable", exp)?, &sys)?;
    let p = seminorm_params(cfg);
    p.validate()?;
    if !force && p.backend != Backend::Exact {
        if !p.within_cost_caps() {
            return Err(refuse(exp, "level 3 needs N ≤ 1e5 and H ≤ 256".into()));
        }
        let work = seminorm_work(&p);
        if work > SEMINORM_WORK_CAP {
            return Err(refuse(
                exp,
                format!("{work:.3e} orbit evaluations > {SEMINORM_WORK_CAP:.0e}"),
            ));
        }
    }
    let est = seminorm(&sys, &f, &p, seed)?;

    let mut violations = Vec::new();
    if !est.value.is_finite() || est.value < 0.0 {
        violations.push(format!(
            "seminorm value {} is not a finite non-negative number",
            est.value
        ));
    }
    let cap = f.sup_bound() + 3.0 * est.stderr + 1e-9;
    if est.value > cap {
        violations.push(format!(
            "seminorm value {} exceeds sup bound plus error {cap}",
            est.value
        ));
    }

    let id = format!("l{}-c{}", est.level, est.c);
    let mut trace = String::from("experiment_id,H,value\n");
    for (h, v) in &est.trace {
        trace.push_str(&format!("{id},{h},{v}\n"));
    }
    Ok(Output {
        files: vec![("seminorm.json".into(), json(&est)), ("trace.csv".into(), trace)],
        violations,
    })
}

struct WeightRun {
    weight: WeightSequence,
    report: CriterionReport,
    n: usize,
}

fn criterion_config(cfg: &Config) -> CriterionConfig {
    let n = cfg.n.unwrap_or(100_000);
    let mut cc = CriterionConfig::new(n, cfg.horizon.unwrap_or(10_000));
    if let Some(d) = &cfg.deltas {
        cc.delta_grid = d.clone();
    }
    if let Some(s) = &cfg.schedule {
        cc.schedule = s.clone();
    }
    if let Some(t) = cfg.tol {
        cc.tol = t;
    }
    cc
}

fn starting_point(cfg: &Config, sys: &System, seed: SeedStream) -> State {
    cfg.x
        .clone()
        .unwrap_or_else(|| sys.sample_invariant(&mut seed.fork_named("x").rng()))
}

fn weight_and_criterion(
    cfg: &Config,
    exp: Experiment,
    seed: SeedStream,
    force: bool,
) -> Result<WeightRun, Failure> {
    let sys = system(cfg, exp)?;
    let f1 = Observable::on(&required(&cfg.f1, "f1", exp)?, &sys)?;
    let f2 = match &cfg.f2 {
        Some(spec) => Observable::on(spec, &sys)?,
        None => f1.clone(),
    };
    let cc = criterion_config(cfg);
    let n = cfg.n.unwrap_or(100_000);
    let total = n + cc.horizon;
    if !force && total > WEIGHT_LENGTH_CAP {
        return Err(refuse(
            exp,
            format!("N + horizon = {total} > {WEIGHT_LENGTH_CAP}"),
        ));
    }
    let x = starting_point(cfg, &sys, seed);
    let weight = make_weight(
        &sys,
        &f1,
        &f2,
        cfg.a1.unwrap_or(1),
        cfg.a2.unwrap_or(2),
        &x,
        total,
    )?;
    let report = bfko_report(&weight, &cc)?;
    Ok(WeightRun { weight, report, n })
}

fn criterion_violations(r: &CriterionReport) -> Vec<String> {
    let mut v = Vec::new();
    for e in &r.densities {
        if !(0.0..=1.0).contains(&e.density) {
            v.push(format!(
                "density {} at δ={} L={} R={} outside [0, 1]",
                e.density, e.delta, e.l, e.r
            ));
        }
    }
    if !r.monotone_in_r {
        v.push("densities increase with R".into());
    }
    if !r.monotone_in_l {
        v.push("densities decrease with L".into());
    }
    v
}

fn density_csv(r: &CriterionReport) -> String {
    let mut out = String::from("delta,L,R,density\n");
    for e in &r.densities {
        out.push_str(&format!("{},{},{},{}\n", e.delta, e.l, e.r, e.density));
    }
    out
}

fn run_criterion(cfg: &Config, seed: SeedStream, force: bool) -> Result<Output, Failure> {
    let w = weight_and_criterion(cfg, Experiment::Criterion, seed, force)?;
    Ok(Output {
        violations: criterion_violations(&w.report),
        files: vec![
            ("weight.csv".into(), w.weight.to_csv()),
            ("criterion.json".into(), json(&w.report)),
            ("densities.csv".into(), density_csv(&w.report)),
        ],
    })
}

#[derive(Serialize)]
struct TargetSummary {
    system: String,
    observable: String,
    y_samples: usize,
    /// Share of sampled `y` whose tail oscillation is below the tolerance.
    converged_fraction: f64,
    max_oscillation: f64,
    max_abs_last: f64,
    runs: Vec<TargetRun>,
}

#[derive(Serialize)]
struct TargetRun {
    y: State,
    last: f64,
    oscillation: f64,
    converged: bool,
}

#[derive(Serialize)]
struct RttReport {
    n: usize,
    oscillation_tol: f64,
    criterion_value: f64,
    criterion_pass: bool,
    targets: Vec<TargetSummary>,
}

fn run_rtt(cfg: &Config, seed: SeedStream, force: bool) -> Result<Output, Failure> {
    let exp = Experiment::Rtt;
    let targets = required(&cfg.targets, "targets", exp)?;
    if targets.is_empty() {
        return Err(Failure::Config("`targets` must list at least one target".into()));
    }
    let n = cfg.n.unwrap_or(100_000);
    let runs: usize = targets.iter().map(|t| t.y_samples).sum();
    if !force && n.saturating_mul(runs) > RTT_WORK_CAP {
        return Err(refuse(
            exp,
            format!("N × samples = {} > {RTT_WORK_CAP}", n.saturating_mul(runs)),
        ));
    }
    let built: Vec<(System, Observable)> = targets
        .iter()
        .map(|t| {
            let s = System::new(&t.system)?;
            let g = Observable::on(&t.g, &s)?;
            Ok((s, g))
        })
        .collect::<Result<_, ergolab::Error>>()?;

    let w = weight_and_criterion(cfg, exp, seed, force)?;
    let tol = cfg.oscillation_tol.unwrap_or(0.05);
    let checkpoints = default_checkpoints(w.n, 16);
    let y_seed = seed.fork_named("rtt-y");
    let mut violations = criterion_violations(&w.report);
    let mut profiles = String::from("experiment_id,N,value\n");
    let mut summaries = Vec::new();
    for (t, (target, (sys, g))) in targets.iter().zip(&built).enumerate() {
        let mut target_runs = Vec::new();
        for i in 0..target.y_samples {
            let y = sys.sample_invariant(&mut y_seed.fork(t as u64).fork(i as u64).rng());
            let p: AverageProfile = weighted_average(&w.weight, sys, g, &y, &checkpoints)?;
            if !p.within_bound() {
                violations.push(format!(
                    "target {t} sample {i}: weighted average exceeds its sup bound"
                ));
            }
            for (cp, v) in p.checkpoints.iter().zip(&p.values) {
                profiles.push_str(&format!("t{t}-y{i},{cp},{v}\n"));
            }
            target_runs.push(TargetRun {
                y,
                last: p.last(),
                oscillation: p.oscillation,
                converged: p.converged(tol),
            });
        }
        let k = target_runs.len().max(1) as f64;
        summaries.push(TargetSummary {
            system: sys.label(),
            observable: g.name().to_string(),
            y_samples: target.y_samples,
            converged_fraction: target_runs.iter().filter(|r| r.converged).count() as f64 / k,
            max_oscillation: target_runs.iter().map(|r| r.oscillation).fold(0.0, f64::max),
            max_abs_last: target_runs.iter().map(|r| r.last.abs()).fold(0.0, f64::max),
            runs: target_runs,
        });
    }
    let report = RttReport {
        n: w.n,
        oscillation_tol: tol,
        criterion_value: w.report.criterion_value,
        criterion_pass: w.report.pass,
        targets: summaries,
    };
    Ok(Output {
        files: vec![
            ("weight.csv".into(), w.weight.to_csv()),
            ("criterion.json".into(), json(&w.report)),
            ("densities.csv".into(), density_csv(&w.report)),
            ("rtt.json".into(), json(&report)),
            ("profiles.csv".into(), profiles),
        ],
        violations,
    })
}

#[derive(Serialize)]
struct VdcSummary {
    sequences: usize,
    n: usize,
    h: usize,
    dim: usize,
    min_slack: f64,
    holds: bool,
}

/// Run `r` draws i.i.d. uniform vectors for even `r` and a noisy oscillation
/// with random frequencies for odd `r`, so both the decorrelated and the
/// strongly correlated regimes are exercised.
fn vdc_sequence(seed: SeedStream, run: usize, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = seed.fork(run as u64).rng();
    if run % 2 == 0 {
        return (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
    }
    let freqs: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 0.02).collect();
    let phases: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (0..n)
        .map(|k| {
            (0..dim)
                .map(|d| {
                    let t = std::f64::consts::TAU * (freqs[d] * k as f64 + phases[d]);
                    t.cos() + 0.1 * rng.gen_range(-1.0..1.0)
                })
                .collect()
        })
        .collect()
}

fn run_vdc(cfg: &Config, seed: SeedStream, force: bool) -> Result<Output, Failure> {
    let exp = Experiment::Vdc;
    let sequences = cfg.sequences.unwrap_or(100);
    let n = cfg.n.unwrap_or(10_000);
    let h = cfg.h.unwrap_or(100);
    let dim = cfg.dim.unwrap_or(3);
    if sequences == 0 || dim == 0 {
        return Err(Failure::Config("`sequences` and `dim` must be positive".into()));
    }
    let work = sequences.saturating_mul(n).saturating_mul(h).saturating_mul(dim);
    if !force && work > VDC_WORK_CAP {
        return Err(refuse(
            exp,
            format!("sequences × N × H × dim = {work} > {VDC_WORK_CAP}"),
        ));
    }
    let mut csv = String::from("run,lhs,rhs,slack\n");
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    for run in 0..sequences {
        let r = vdc_check(&vdc_sequence(seed, run, n, dim), h)?;
        csv.push_str(&format!("{run},{},{},{}\n", r.lhs, r.rhs, r.slack));
        if !r.holds() {
            violations.push(format!("run {run}: lhs {} exceeds rhs {}", r.lhs, r.rhs));
        }
        min_slack = min_slack.min(r.slack);
    }
    let summary = VdcSummary {
        sequences,
        n,
        h,
        dim,
        min_slack,
        holds: violations.is_empty(),
    };
    Ok(Output {
        files: vec![("vdc.csv".into(), csv), ("vdc.json".into(), json(&summary))],
        violations,
    })
}

fn pair_observables(
    cfg: &Config,
    sys: &System,
    exp: Experiment,
) -> Result<(Observable, Observable), Failure> {
    let f1 = Observable::on(&required(&cfg.f1, "f1", exp)?, sys)?;
    let f2 = match &cfg.f2 {
        Some(spec) => Observable::on(spec, sys)?,
        None => f1.clone(),
    };
    Ok((f1, f2))
}

fn run_extension(cfg: &Config, seed: SeedStream, force: bool) -> Result<Output, Failure> {
    let exp = Experiment::Extension;
    let sys = system(cfg, exp)?;
    let (f1, f2) = pair_observables(cfg, &sys, exp)?;
    let (a1, a2) = (cfg.a1.unwrap_or(1), cfg.a2.unwrap_or(2));
    let n = cfg.n.unwrap_or(100_000);
    let samples = cfg.samples.unwrap_or(100);
    if !force && n.saturating_mul(samples) > EXTENSION_WORK_CAP {
        return Err(refuse(
            exp,
            format!(
                "N × samples = {} > {EXTENSION_WORK_CAP}",
                n.saturating_mul(samples)
            ),
        ));
    }
    let report = joining_decay(&sys, &f1, &f2, a1, a2, n, samples, seed.fork_named("decay"))?;

    let sampler = TildeMuSampler::new(&sys, a1, a2)?;
    let check = seed.fork_named("relation");
    let mut violations = Vec::new();
    for i in 0..RELATION_SAMPLES {
        let (x, xi1, xi2) = sampler.sample(&mut check.fork(i).rng());
        let r = sampler.relation_residual(&x, &xi1, &xi2)?;
        if !(r < RELATION_TOL) {
            violations.push(format!("sample {i}: joining relation residual {r:e}"));
        }
    }

    let mut profile = String::from("N,mean_abs\n");
    for (cp, v) in report.checkpoints.iter().zip(&report.mean_abs_profile) {
        profile.push_str(&format!("{cp},{v}\n"));
    }
    Ok(Output {
        files: vec![
            ("decay.json".into(), json(&report)),
            ("averages.csv".into(), report.to_csv()),
            ("decay_profile.csv".into(), profile),
        ],
        violations,
    })
}

#[derive(Serialize)]
struct GenericSummary {
    tol: f64,
    within_tol: usize,
    points: usize,
    reports: Vec<ergolab::extension::IdentityReport>,
}

fn run_generic(cfg: &Config, seed: SeedStream, force: bool) -> Result<Output, Failure> {
    let exp = Experiment::Generic;
    let sys = system(cfg, exp)?;
    let (g1, g2) = pair_observables(cfg, &sys, exp)?;
    let (a1, a2) = (cfg.a1.unwrap_or(1), cfg.a2.unwrap_or(2));
    let n = cfg.n.unwrap_or(100_000);
    let mc = cfg.mc.unwrap_or(20_000);
    if !force && (n > GENERIC_SIZE_CAP || mc > GENERIC_SIZE_CAP) {
        return Err(refuse(exp, format!("N and mc must both be ≤ {GENERIC_SIZE_CAP}")));
    }
    let tol = cfg.tol.unwrap_or(0.03);
    let points: Vec<State> = match &cfg.x {
        Some(x) => vec![x.clone()],
        None => {
            let s = seed.fork_named("x");
            (0..cfg.points.unwrap_or(10) as u64)
                .map(|i| sys.sample_invariant(&mut s.fork(i).rng()))
                .collect()
        }
    };
    let draws = seed.fork_named("fibre");
    let reports = points
        .iter()
        .enumerate()
        .map(|(i, x)| generic_point_check(&sys, &g1, &g2, a1, a2, x, n, mc, draws.fork(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("point,lhs,rhs,diff,error_bar\n");
    for (i, r) in reports.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{},{}\n", r.lhs, r.rhs, r.diff, r.error_bar));
    }
    let summary = GenericSummary {
        tol,
        within_tol: reports.iter().filter(|r| r.within(tol)).count(),
        points: reports.len(),
        reports,
    };
    // The identity is a limit statement; finite-N gaps are reported, not asserted.
    Ok(Output {
        files: vec![
            ("generic.json".into(), json(&summary)),
            ("generic.csv".into(), csv),
        ],
        violations: Vec::new(),
    })
}
