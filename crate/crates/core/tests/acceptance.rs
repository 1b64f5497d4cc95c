//! Acceptance gate. Each criterion prints one PASS/FAIL line with its
//! measured quantities and wall time; the process exits non-zero if any fails.

use std::f64::consts::TAU;
use std::time::Instant;

use ergolab::averages::{default_checkpoints, vdc_check, weighted_average};
use ergolab::criterion::{bfko_report, make_weight, CriterionConfig, CriterionReport, WeightSequence};
use ergolab::extension::{generic_point_check, joining_decay};
use ergolab::numeric::{frac, GOLDEN_CONJUGATE, SQRT2_MINUS_1};
use ergolab::seminorms::{
    check_multilinear_estimate, check_product_inequality, seminorm, Backend, ProductCheckParams,
    SeminormParams,
};
use ergolab::{Dynamics, Observable, ObservableSpec, SeedStream, State, System, SystemSpec};
use rand::Rng;

const SEED: u64 = 20240611;

fn sys(spec: SystemSpec) -> System {
    System::new(&spec).unwrap()
}

fn obs(spec: ObservableSpec, s: &System) -> Observable {
    Observable::on(&spec, s).unwrap()
}

// 1. Seminorm oracle -------------------------------------------------------

/// `(1/(2H+1)) Σ_{|h|≤H} ((1/N) Σ_{n<N} f(n) f(n+h))²` with plain `f64`
/// orbit arithmetic: for an ergodic rotation `‖f·T^h f‖_{U^1}² = (∫ f·T^h f)²`.
fn u2_power_oracle(alpha: f64, x0: f64, n: usize, h: usize) -> f64 {
    let f = |k: i64| (TAU * frac(x0 + k as f64 * alpha)).cos();
    let vals: Vec<f64> = (-(h as i64)..(n + h) as i64).map(f).collect();
    let at = |k: i64| vals[(k + h as i64) as usize];
    let mut total = 0.0;
    for s in -(h as i64)..=h as i64 {
        let mut rho = 0.0;
        for k in 0..n as i64 {
            rho += at(k) * at(k + s);
        }
        rho /= n as f64;
        total += rho * rho;
    }
    total / (2 * h + 1) as f64
}

fn criterion_seminorm_oracle() -> (bool, String) {
    let s = sys(SystemSpec::rotation(SQRT2_MINUS_1.hi));
    let f = obs(ObservableSpec::cos(1), &s);
    let p = SeminormParams::new(2, 1, 1000, 100_000, Backend::Orbit);
    let e = seminorm(&s, &f, &p, SeedStream::new(SEED)).unwrap();
    let target = 8f64.powf(-0.25);
    let oracle = u2_power_oracle(SQRT2_MINUS_1.hi, 0.123, 100_000, 1000).powf(0.25);
    let rel = (e.value - target).abs() / target;
    let rel_oracle = (oracle - target).abs() / target;
    (
        rel < 0.02 && rel_oracle < 0.02,
        format!(
            "U^2 = {:.5} (±{:.1e}), oracle {:.5}, 8^(-1/4) = {:.5}, rel err {:.2e}",
            e.value, e.stderr, oracle, target, rel
        ),
    )
}

// 2. Exact finite systems ----------------------------------------------------

/// `U^l(T,c)^{2^l}` on `ℤ/q` from the atoms of `I_{T^c}` (residues mod
/// `gcd(c, q)`) and the period mean of the recursion.
fn cyclic_oracle_power(f: &[f64], level: u32, c: i64) -> f64 {
    let q = f.len();
    if level == 1 {
        let g = gcd(c.unsigned_abs() as usize, q);
        let mut cond = vec![0.0; g];
        for (j, v) in f.iter().enumerate() {
            cond[j % g] += v / (q / g) as f64;
        }
        return (0..q).map(|j| cond[j % g] * cond[j % g]).sum::<f64>() / q as f64;
    }
    (0..q)
        .map(|h| {
            let g: Vec<f64> = (0..q).map(|j| f[j] * f[(j + h) % q]).collect();
            cyclic_oracle_power(&g, level - 1, c)
        })
        .sum::<f64>()
        / q as f64
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn criterion_exact_cyclic() -> (bool, String) {
    let mut rng = SeedStream::new(SEED).fork_named("tables").rng();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut monotone = true;
    for q in [2u64, 3, 4, 6] {
        let s = sys(SystemSpec::cyclic(q));
        let mut tables: Vec<Vec<f64>> = vec![
            (0..q).map(|j| (TAU * j as f64 / q as f64).cos()).collect(),
            (0..q).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect(),
        ];
        for _ in 0..3 {
            tables.push((0..q).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
        for t in &tables {
            let f = obs(ObservableSpec::Table { values: t.clone() }, &s);
            for level in 1..=2u32 {
                let mut by_c = Vec::new();
                for c in [1i64, 2, 3, 6] {
                    let p = SeminormParams::new(level, c, 1, 1, Backend::Exact);
                    let e = seminorm(&s, &f, &p, SeedStream::new(SEED)).unwrap();
                    let power = cyclic_oracle_power(t, level, c);
                    let power = if power.abs() < 1e-13 { 0.0 } else { power };
                    let oracle = power.powf(1.0 / 2f64.powi(level as i32));
                    worst = worst.max((e.value - oracle).abs());
                    cases += 1;
                    by_c.push((c, e.value));
                }
                for &(c1, v1) in &by_c {
                    for &(c2, v2) in &by_c {
                        if c2 % c1 == 0 && v1 > v2 + 1e-9 {
                            monotone = false;
                        }
                    }
                }
            }
        }
    }
    (
        worst < 1e-9 && monotone,
        format!("{cases} cases, max |exact − oracle| = {worst:.1e}, divisibility monotone: {monotone}"),
    )
}

// 3. BFKO discrimination -----------------------------------------------------

const RTT_N: usize = 100_000;
const HORIZON: usize = 10_000;

fn bernoulli_weight(seed: u64) -> WeightSequence {
    let coin = sys(SystemSpec::coin());
    let f = obs(ObservableSpec::coordinate(0), &coin);
    let x = coin.sample_invariant(&mut SeedStream::new(seed).fork_named("weight-x").rng());
    make_weight(&coin, &f, &f, 1, 2, &x, RTT_N + HORIZON).unwrap()
}

fn bfko_bernoulli(seed: u64) -> CriterionReport {
    bfko_report(&bernoulli_weight(seed), &CriterionConfig::new(RTT_N, HORIZON)).unwrap()
}

fn criterion_bfko() -> (bool, String) {
    let len = RTT_N + HORIZON;
    let zero = WeightSequence::external(vec![0.0; len], 1.0).unwrap();
    let z = bfko_report(&zero, &CriterionConfig::new(RTT_N, HORIZON)).unwrap();
    let alt = WeightSequence::external(
        (1..=len).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        1.0,
    )
    .unwrap();
    let mut cfg = CriterionConfig::new(RTT_N, HORIZON);
    cfg.delta_grid = vec![0.5];
    let a = bfko_report(&alt, &cfg).unwrap();
    let b = bfko_bernoulli(SEED);
    let ok = z.criterion_value == 1.0
        && z.pass
        && a.criterion_value == 0.0
        && !a.pass
        && b.criterion_value >= 0.95
        && b.pass
        && b.monotone_in_l
        && b.monotone_in_r;
    (
        ok,
        format!(
            "zero {:.3} ({}), alternating {:.3} ({}), bernoulli {:.4} ({}) per δ {:?}",
            z.criterion_value,
            verdict(z.pass),
            a.criterion_value,
            verdict(a.pass),
            b.criterion_value,
            verdict(b.pass),
            b.per_delta
                .iter()
                .map(|v| (v * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    )
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

// 4. Return times ------------------------------------------------------------

fn rtt_targets() -> Vec<(&'static str, System, ObservableSpec)> {
    vec![
        (
            "rotation(√2−1)",
            sys(SystemSpec::rotation(SQRT2_MINUS_1.hi)),
            ObservableSpec::cos(1),
        ),
        (
            "rotation(golden)",
            sys(SystemSpec::rotation(GOLDEN_CONJUGATE.hi)),
            ObservableSpec::cos(3),
        ),
        (
            "skew_product",
            sys(SystemSpec::skew_product(SQRT2_MINUS_1.hi)),
            ObservableSpec::Cos { freq: 1, coord: 1 },
        ),
        ("cyclic(5)", sys(SystemSpec::cyclic(5)), ObservableSpec::cos(1)),
        (
            "bernoulli",
            sys(SystemSpec::coin()),
            ObservableSpec::coordinate(0),
        ),
    ]
}

fn criterion_return_times() -> (bool, String) {
    let w = bernoulli_weight(SEED);
    let cps = default_checkpoints(RTT_N, 16);
    let mut ok = true;
    let mut parts = Vec::new();
    for (t, (name, s, g)) in rtt_targets().into_iter().enumerate() {
        let g = obs(g, &s);
        let good = (0..20u64)
            .filter(|&i| {
                let y = s.sample_invariant(
                    &mut SeedStream::new(SEED)
                        .fork_named("rtt-y")
                        .fork(t as u64)
                        .fork(i)
                        .rng(),
                );
                weighted_average(&w, &s, &g, &y, &cps).unwrap().oscillation < 0.05
            })
            .count();
        ok &= good >= 19;
        parts.push(format!("{name} {good}/20"));
    }
    (ok, parts.join(", "))
}

// 5. Joining decay ---------------------------------------------------------

fn criterion_joining_decay() -> (bool, String) {
    let coin = sys(SystemSpec::coin());
    let f = obs(ObservableSpec::coordinate(0), &coin);
    let b = joining_decay(&coin, &f, &f, 1, 2, 100_000, 100, SeedStream::new(SEED)).unwrap();
    let r = sys(SystemSpec::rotation(SQRT2_MINUS_1.hi));
    let f1 = obs(ObservableSpec::cos(2), &r);
    let f2 = obs(ObservableSpec::cos(1), &r);
    let c = joining_decay(&r, &f1, &f2, 1, 2, 100_000, 100, SeedStream::new(SEED)).unwrap();
    (
        b.mean_abs < 0.05 && c.mean_abs > 0.1,
        format!(
            "bernoulli mean |avg| = {:.4}, rotation contrast = {:.4}",
            b.mean_abs, c.mean_abs
        ),
    )
}

// 6. Fully generic identity --------------------------------------------------

fn criterion_generic() -> (bool, String) {
    let r = sys(SystemSpec::rotation(SQRT2_MINUS_1.hi));
    let c1 = obs(ObservableSpec::cos(1), &r);
    let c2 = obs(ObservableSpec::cos(2), &r);
    let mut null_ok = 0;
    let mut res_ok = 0;
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let seed = SeedStream::new(SEED).fork_named("generic").fork(i);
        let x = r.sample_invariant(&mut seed.rng());
        let xv = x.coords().unwrap()[0];
        let null = generic_point_check(&r, &c1, &c1, 1, 2, &x, 100_000, 20_000, seed.fork(1)).unwrap();
        let res = generic_point_check(&r, &c2, &c1, 1, 2, &x, 100_000, 20_000, seed.fork(2)).unwrap();
        if null.diff < 0.03 && null.rhs.abs() < 0.03 {
            null_ok += 1;
        }
        if res.diff < 0.03 && (res.lhs - 0.5 * (TAU * xv).cos()).abs() < 0.03 {
            res_ok += 1;
        }
        worst = worst.max(null.diff).max(res.diff);
    }
    (
        null_ok >= 9 && res_ok >= 9,
        format!("null {null_ok}/10, resonant {res_ok}/10, max |LHS−RHS| = {worst:.4}"),
    )
}

// 7. Inequality suites -------------------------------------------------------

fn criterion_inequalities() -> (bool, String) {
    let mut rng = SeedStream::new(SEED).fork_named("vdc").rng();
    let mut min_slack = f64::INFINITY;
    for _ in 0..100 {
        let u: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.iter().map(|a| a / norm).collect()
            })
            .collect();
        min_slack = min_slack.min(vdc_check(&u, 100).unwrap().slack);
    }
    let vdc_ok = min_slack >= -1e-9;

    // product inequality over a grid
    let rot = SystemSpec::rotation(SQRT2_MINUS_1.hi);
    let pairs = [
        (
            rot.clone(),
            ObservableSpec::cos(1),
            rot.clone(),
            ObservableSpec::cos(1),
        ),
        (
            rot.clone(),
            ObservableSpec::cos(1),
            SystemSpec::skew_product(GOLDEN_CONJUGATE.hi),
            ObservableSpec::Cos { freq: 1, coord: 1 },
        ),
        (
            SystemSpec::coin(),
            ObservableSpec::coordinate(0),
            rot.clone(),
            ObservableSpec::cos(1),
        ),
    ];
    let params = ProductCheckParams {
        lhs: SeminormParams::new(1, 1, 16, 2000, Backend::MonteCarlo).with_m(96),
        rhs: SeminormParams::new(2, 1, 32, 20_000, Backend::Orbit),
    };
    let mut product_cases = 0;
    let mut product_fail = Vec::new();
    for (k, (xs, f, ys, g)) in pairs.iter().enumerate() {
        let (sx, sy) = (sys(xs.clone()), sys(ys.clone()));
        let (f, g) = (obs(f.clone(), &sx), obs(g.clone(), &sy));
        for a in [1i64, 2] {
            for b in [1i64, -1] {
                for c in [1i64, 2] {
                    for l in [1u32, 2] {
                        let seed = SeedStream::new(SEED)
                            .fork_named("product")
                            .fork((k * 100) as u64 + product_cases);
                        let r =
                            check_product_inequality(&sx, &f, &sy, &g, a, b, c, l, &params, seed).unwrap();
                        product_cases += 1;
                        if !r.holds {
                            product_fail.push(format!(
                                "pair{k} a={a} b={b} c={c} l={l}: {:.4} > {:.4}",
                                r.lhs.value, r.rhs
                            ));
                        }
                    }
                }
            }
        }
    }

    // Multilinear estimate across the zoo. `true` marks cases whose
    // seminorm vanishes in the limit; there the average must be small even
    // when the finite-H estimate of the seminorm sits above its bias floor.
    let zoo: Vec<(System, Vec<ObservableSpec>, Vec<i64>, bool)> = vec![
        (sys(rot.clone()), vec![ObservableSpec::cos(1)], vec![1], true),
        (
            sys(rot.clone()),
            vec![ObservableSpec::cos(1), ObservableSpec::cos(1)],
            vec![1, 2],
            false,
        ),
        (
            sys(SystemSpec::coin()),
            vec![ObservableSpec::coordinate(0)],
            vec![1],
            true,
        ),
        (
            sys(SystemSpec::coin()),
            vec![ObservableSpec::coordinate(0), ObservableSpec::coordinate(0)],
            vec![1, 2],
            true,
        ),
        (
            sys(SystemSpec::cyclic(4)),
            vec![ObservableSpec::cos(1)],
            vec![1],
            true,
        ),
        (
            sys(SystemSpec::skew_product(SQRT2_MINUS_1.hi)),
            vec![ObservableSpec::Cos { freq: 1, coord: 1 }],
            vec![1],
            true,
        ),
        (
            sys(SystemSpec::skew_product(SQRT2_MINUS_1.hi)),
            vec![ObservableSpec::Cos { freq: 1, coord: 1 }, ObservableSpec::cos(1)],
            vec![1, 2],
            true,
        ),
    ];
    let mut small = 0;
    let mut ml_fail = Vec::new();
    for (k, (s, fs, exps, vanishing)) in zoo.iter().enumerate() {
        let fs: Vec<Observable> = fs.iter().map(|f| obs(f.clone(), s)).collect();
        let backend = if s.finite_states().is_some() {
            Backend::Exact
        } else {
            Backend::Orbit
        };
        let p = if fs.len() == 1 {
            SeminormParams::new(1, 1, 4096, 100_000, backend)
        } else {
            SeminormParams::new(2, 1, 256, 50_000, backend)
        }
        .with_m(64);
        let seed = SeedStream::new(SEED).fork_named("multilinear").fork(k as u64);
        let r = check_multilinear_estimate(s, &fs, exps, 0, &p, seed).unwrap();
        if r.rhs.value < 0.02 {
            small += 1;
        }
        if !r.implication_holds || (*vanishing && r.lhs >= 0.05) {
            ml_fail.push(format!("zoo{k}: lhs {:.4} rhs {:.4}", r.lhs, r.rhs.value));
        }
    }
    (
        vdc_ok && product_fail.is_empty() && ml_fail.is_empty(),
        format!(
            "vdC min slack {min_slack:.3e}; product {}/{product_cases} hold {product_fail:?}; \
             multilinear {} cases ({small} with small RHS) {ml_fail:?}",
            product_cases as usize - product_fail.len(),
            zoo.len()
        ),
    )
}

// 8. Determinism -------------------------------------------------------------

fn fingerprint() -> String {
    let s = sys(SystemSpec::rotation(SQRT2_MINUS_1.hi));
    let f = obs(ObservableSpec::cos(1), &s);
    let orbit = seminorm(
        &s,
        &f,
        &SeminormParams::new(2, 1, 128, 20_000, Backend::Orbit),
        SeedStream::new(SEED),
    )
    .unwrap();
    let skew = sys(SystemSpec::skew_product(SQRT2_MINUS_1.hi));
    let g = obs(ObservableSpec::Cos { freq: 1, coord: 1 }, &skew);
    let mc = seminorm(
        &skew,
        &g,
        &SeminormParams::new(2, 2, 8, 1000, Backend::MonteCarlo).with_m(64),
        SeedStream::new(SEED),
    )
    .unwrap();
    let bfko = bfko_bernoulli(SEED);
    let coin = sys(SystemSpec::coin());
    let h = obs(ObservableSpec::coordinate(0), &coin);
    let cor = joining_decay(&coin, &h, &h, 1, 2, 20_000, 32, SeedStream::new(SEED)).unwrap();
    let w = bernoulli_weight(SEED);
    let prof = weighted_average(&w, &s, &f, &State::point(0.3), &default_checkpoints(RTT_N, 16)).unwrap();
    serde_json::to_string(&(orbit, mc, bfko, cor, prof.to_csv("rtt"))).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_determinism() -> (bool, String) {
    let one = in_pool(1, fingerprint);
    let four = in_pool(4, fingerprint);
    let again = in_pool(4, fingerprint);
    (
        one == four && four == again,
        format!(
            "{} bytes, 1 vs 4 threads identical: {}, rerun identical: {}",
            one.len(),
            one == four,
            four == again
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, f64, fn() -> (bool, String))> = vec![
        ("1 seminorm oracle", 30.0, criterion_seminorm_oracle),
        ("2 exact finite systems", 5.0, criterion_exact_cyclic),
        ("3 BFKO discrimination", 60.0, criterion_bfko),
        ("4 return times end-to-end", 300.0, criterion_return_times),
        ("5 joining decay", 180.0, criterion_joining_decay),
        ("6 fully generic identity", 120.0, criterion_generic),
        ("7 inequality suites", 300.0, criterion_inequalities),
        ("8 determinism", f64::INFINITY, criterion_determinism),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let (ok, detail) = run();
        let secs = start.elapsed().as_secs_f64();
        let ok = ok && secs < budget;
        if !ok {
            failed += 1;
        }
        let budget = if budget.is_finite() {
            format!("{budget:.0} s")
        } else {
            "none".to_string()
        };
        println!(
            "{} [{name}] {detail} ({secs:.1} s, budget {budget})",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
