//! The conditionally independent three-fold self-joining over the Kronecker
//! factor.
//!
//! For distinct non-zero `a1, a2` and a torus Kronecker factor `Z` with
//! rotation `α`, `Z′` is the closure of `{(a1 nα, a2 nα)}`, which for
//! irrational `α` is `{(a1 t, a2 t) : t ∈ Z}`. The joining
//! `μ̃ = ∫ δ_x ⊗ ν_{πx} dμ(x)` with `ν_z = ∫_{Z′} μ_{z+z1} ⊗ μ_{z+z2}` is
//! realized by sampling: `x ~ μ`, `(z1, z2) ~ Haar(Z′)`, `ξ_i ~ μ_{πx+z_i}`.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averages::{check_exponents, default_checkpoints, AverageProfile};
use crate::error::{unsupported, Result};
use crate::numeric::{circle_dist, frac, gcd};
use crate::rng::SeedStream;
use crate::seminorms::{seminorm, Backend, SeminormEstimate, SeminormParams};
use crate::stats;
use crate::systems::{
    strided_values, Dynamics, KroneckerGroup, KroneckerPoint, Observable, ObservableSpec, State, System,
    SystemSpec,
};

/// Haar measure on `Z′ ⊂ Z × Z` for a torus (or trivial) Kronecker factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZPrimeSampler {
    pub a1: i64,
    pub a2: i64,
    /// Dimension of the Kronecker torus; 0 for a trivial factor.
    pub dim: usize,
    pub d: u64,
    /// `(a2/d, −a1/d)`: annihilates every point of `Z′`.
    pub annihilator: (i64, i64),
}

impl ZPrimeSampler {
    pub fn new(system: &System, a1: i64, a2: i64) -> Result<ZPrimeSampler> {
        check_exponents(a1, a2)?;
        let dim = match system.kronecker_group()? {
            KroneckerGroup::Trivial => 0,
            KroneckerGroup::Torus { alphas } => {
                if !system.declared_ergodic() {
                    return Err(unsupported(format!(
                        "{} has a rational rotation; its orbit closure is finite",
                        system.label()
                    )));
                }
                alphas.len()
            }
            KroneckerGroup::Cyclic { .. } => {
                return Err(unsupported("finite Kronecker factors are not sampled"));
            }
            KroneckerGroup::Product(..) => {
                return Err(unsupported("product Kronecker factors are not sampled"));
            }
        };
        let d = gcd(a1.unsigned_abs(), a2.unsigned_abs());
        Ok(ZPrimeSampler {
            a1,
            a2,
            dim,
            d,
            annihilator: (a2 / d as i64, -a1 / d as i64),
        })
    }

    /// `(frac(a1 t), frac(a2 t))` with `t` uniform on the torus.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..self.dim).map(|_| rng.gen::<f64>()).collect();
        (
            t.iter().map(|&s| frac(self.a1 as f64 * s)).collect(),
            t.iter().map(|&s| frac(self.a2 as f64 * s)).collect(),
        )
    }

    /// Largest circle distance of `(a2/d)·z1 − (a1/d)·z2` from 0.
    pub fn residual(&self, z1: &[f64], z2: &[f64]) -> f64 {
        let (p, q) = self.annihilator;
        z1.iter()
            .zip(z2)
            .map(|(&u, &v)| circle_dist(frac(p as f64 * u + q as f64 * v), 0.0))
            .fold(0.0, f64::max)
    }
}

fn torus_coords(z: &KroneckerPoint) -> Vec<f64> {
    match z {
        KroneckerPoint::Torus(t) => t.clone(),
        _ => Vec::new(),
    }
}

/// Sampler for `μ̃` on `X̃ = X × X × X`.
#[derive(Debug, Clone)]
pub struct TildeMuSampler {
    pub system: System,
    pub zprime: ZPrimeSampler,
}

impl TildeMuSampler {
    pub fn new(system: &System, a1: i64, a2: i64) -> Result<TildeMuSampler> {
        Ok(TildeMuSampler {
            zprime: ZPrimeSampler::new(system, a1, a2)?,
            system: system.clone(),
        })
    }

    /// Fibre sample `(ξ1, ξ2) ~ ν_z`.
    pub fn sample_nu(&self, z: &KroneckerPoint, rng: &mut ChaCha8Rng) -> (State, State) {
        let (z1, z2) = self.zprime.sample(rng);
        let xi1 = self
            .system
            .sample_fiber(&z.translate(&z1), rng)
            .expect("fibre sampler checked at construction");
        let xi2 = self
            .system
            .sample_fiber(&z.translate(&z2), rng)
            .expect("fibre sampler checked at construction");
        (xi1, xi2)
    }

    /// `(x, ξ1, ξ2) ~ μ̃`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> (State, State, State) {
        let x = self.system.sample_invariant(rng);
        let z = self
            .system
            .kronecker_project(&x)
            .expect("Kronecker projection checked at construction");
        let (xi1, xi2) = self.sample_nu(&z, rng);
        (x, xi1, xi2)
    }

    /// Distance of `(πξ1 − πx, πξ2 − πx)` from `Z′`, via the annihilator.
    pub fn relation_residual(&self, x: &State, xi1: &State, xi2: &State) -> Result<f64> {
        let p = torus_coords(&self.system.kronecker_project(x)?);
        let p1 = torus_coords(&self.system.kronecker_project(xi1)?);
        let p2 = torus_coords(&self.system.kronecker_project(xi2)?);
        let d1: Vec<f64> = p1.iter().zip(&p).map(|(a, b)| frac(a - b)).collect();
        let d2: Vec<f64> = p2.iter().zip(&p).map(|(a, b)| frac(a - b)).collect();
        Ok(self.zprime.residual(&d1, &d2))
    }
}

/// `(X̃, μ̃, T × T × T)` as a system for the estimators. States are
/// `State::Tuple([x, ξ1, ξ2])`.
#[derive(Debug, Clone)]
pub struct TildeSystem {
    pub sampler: TildeMuSampler,
}

impl TildeSystem {
    pub fn new(system: &System, a1: i64, a2: i64) -> Result<TildeSystem> {
        Ok(TildeSystem {
            sampler: TildeMuSampler::new(system, a1, a2)?,
        })
    }

    /// `F(x, ξ1, ξ2) = f(x)·f(ξ_i)` for `i ∈ {1, 2}`.
    pub fn lift(&self, f: &Observable, i: usize) -> Result<Observable> {
        let one = Observable::on(&ObservableSpec::constant(1.0), &self.sampler.system)?;
        Ok(match i {
            1 => Observable::tensor(vec![f.clone(), f.clone(), one]),
            2 => Observable::tensor(vec![f.clone(), one, f.clone()]),
            _ => {
                return Err(crate::error::argument(format!(
                    "lift index must be 1 or 2, got {i}"
                )))
            }
        })
    }
}

impl Dynamics for TildeSystem {
    fn jump(&self, x: &State, n: i64) -> State {
        match x {
            State::Tuple(parts) if parts.len() == 3 => {
                State::Tuple(parts.iter().map(|p| self.sampler.system.jump(p, n)).collect())
            }
            _ => panic!("state {x:?} is not a point of the self-joining"),
        }
    }

    fn sample_invariant(&self, rng: &mut ChaCha8Rng) -> State {
        let (x, a, b) = self.sampler.sample(rng);
        State::Tuple(vec![x, a, b])
    }

    /// `T̃` preserves every set `{πξ_i − πx ∈ A}`, so `μ̃` is not ergodic
    /// unless the Kronecker factor is trivial; estimators use Monte Carlo.
    fn declared_ergodic(&self) -> bool {
        false
    }

    fn label(&self) -> String {
        format!(
            "joining({}; {}, {})",
            self.sampler.system.label(),
            self.sampler.zprime.a1,
            self.sampler.zprime.a2
        )
    }
}

/// Decay of the lifted bilinear averages over `μ̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: usize,
    pub samples: usize,
    pub checkpoints: Vec<usize>,
    /// Mean of `|A_N|` over samples at every checkpoint.
    pub mean_abs_profile: Vec<f64>,
    /// `A_N` at the last checkpoint, per sample.
    pub averages: Vec<f64>,
    pub mean_abs: f64,
    pub mean_oscillation: f64,
    pub max_oscillation: f64,
}

impl DecayReport {
    /// Mean `|A_M|` at checkpoint `m`, if tabulated.
    pub fn mean_abs_at(&self, m: usize) -> Option<f64> {
        self.checkpoints
            .iter()
            .position(|&c| c == m)
            .map(|i| self.mean_abs_profile[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,average\n");
        for (i, a) in self.averages.iter().enumerate() {
            out.push_str(&format!("{i},{a}\n"));
        }
        out
    }
}

/// `(1/N) Σ_{n=1}^N f1(T^{a1 n}x) f2(T^{a2 n}x) f1(T^{a1 n}ξ1) f2(T^{a2 n}ξ2)`
/// over `samples` draws `(x, ξ1, ξ2) ~ μ̃`.
#[allow(clippy::too_many_arguments)]
pub fn joining_decay(
    base: &System,
    f1: &Observable,
    f2: &Observable,
    a1: i64,
    a2: i64,
    n: usize,
    samples: usize,
    seed: SeedStream,
) -> Result<DecayReport> {
    let sampler = TildeMuSampler::new(base, a1, a2)?;
    if n == 0 || samples == 0 {
        return Err(crate::error::argument("N and the sample count must be positive"));
    }
    let mut cps: BTreeSet<usize> = default_checkpoints(n, 16).into_iter().collect();
    if n >= 4 {
        cps.insert(n / 4);
    }
    let checkpoints: Vec<usize> = cps.into_iter().collect();
    let bound = (f1.sup_bound() * f2.sup_bound()).powi(2);
    let profiles: Vec<AverageProfile> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (x, xi1, xi2) = sampler.sample(&mut seed.fork(i).rng());
            let top = n as i64;
            let mut s = strided_values(base, &x, a1, 1, top, f1);
            for (point, f, a) in [(&x, f2, a2), (&xi1, f1, a1), (&xi2, f2, a2)] {
                for (v, w) in s.iter_mut().zip(strided_values(base, point, a, 1, top, f)) {
                    *v *= w;
                }
            }
            AverageProfile::from_summands(&s, &checkpoints, bound)
        })
        .collect::<Result<_>>()?;
    let mean_abs_profile: Vec<f64> = (0..checkpoints.len())
        .map(|k| stats::mean(&profiles.iter().map(|p| p.values[k].abs()).collect::<Vec<_>>()))
        .collect();
    let averages: Vec<f64> = profiles.iter().map(|p| p.last()).collect();
    let osc: Vec<f64> = profiles.iter().map(|p| p.oscillation).collect();
    Ok(DecayReport {
        n,
        samples,
        mean_abs: *mean_abs_profile.last().unwrap(),
        mean_abs_profile,
        checkpoints,
        averages,
        mean_oscillation: stats::mean(&osc),
        max_oscillation: osc.iter().copied().fold(0.0, f64::max),
    })
}

/// Both sides of `lim (1/N) Σ g1(T^{a1 n}x) g2(T^{a2 n}x) = ∫ g1⊗g2 dν_{πx}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub x: State,
    pub n: usize,
    pub mc: usize,
    pub lhs: f64,
    /// Tail oscillation of the orbit average.
    pub lhs_oscillation: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub diff: f64,
    /// `lhs_oscillation + 3·rhs_stderr`.
    pub error_bar: f64,
}

impl IdentityReport {
    pub fn within(&self, tol: f64) -> bool {
        self.diff < tol
    }
}

#[allow(clippy::too_many_arguments)]
pub fn generic_point_check(
    base: &System,
    g1: &Observable,
    g2: &Observable,
    a1: i64,
    a2: i64,
    x: &State,
    n: usize,
    mc: usize,
    seed: SeedStream,
) -> Result<IdentityReport> {
    let sampler = TildeMuSampler::new(base, a1, a2)?;
    if n == 0 || mc < 2 {
        return Err(crate::error::argument(
            "N must be positive and at least 2 draws are needed",
        ));
    }
    let lhs = crate::averages::bilinear_average(base, g1, g2, a1, a2, x, &default_checkpoints(n, 16))?;
    let z = base.kronecker_project(x)?;
    let draws: Vec<f64> = (0..mc as u64)
        .into_par_iter()
        .map(|i| {
            let (xi1, xi2) = sampler.sample_nu(&z, &mut seed.fork(i).rng());
            g1.eval(&xi1) * g2.eval(&xi2)
        })
        .collect();
    let rhs = stats::mean(&draws);
    let rhs_stderr = stats::stderr(&draws);
    Ok(IdentityReport {
        x: x.clone(),
        n,
        mc,
        lhs: lhs.last(),
        lhs_oscillation: lhs.oscillation,
        rhs,
        rhs_stderr,
        diff: (lhs.last() - rhs).abs(),
        error_bar: lhs.oscillation + 3.0 * rhs_stderr,
    })
}

/// `U^l` of `f(x)·f(ξ_i)` on `X̃` against `U^l` of `f⊗f` on `X × X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub i: usize,
    pub joining: SeminormEstimate,
    pub product: SeminormEstimate,
    pub diff: f64,
    pub combined_stderr: f64,
    /// `diff ≤ 3·combined_stderr`.
    pub consistent: bool,
}

/// Compare the seminorm of a lifted function on the joining with the one on
/// the product factor. Both sides use the Monte Carlo backend with `params`.
#[allow(clippy::too_many_arguments)]
pub fn lift_consistency(
    base: &System,
    f: &Observable,
    a1: i64,
    a2: i64,
    i: usize,
    params: &SeminormParams,
    seed: SeedStream,
) -> Result<LiftReport> {
    let joining = TildeSystem::new(base, a1, a2)?;
    let lifted = joining.lift(f, i)?;
    let mut p = params.clone();
    p.backend = Backend::MonteCarlo;
    let on_joining = seminorm(&joining, &lifted, &p, seed.fork_named("joining"))?;
    let product = System::new(&SystemSpec::product(base.spec().clone(), base.spec().clone()))?;
    let ff = Observable::tensor(vec![f.clone(), f.clone()]);
    let on_product = seminorm(&product, &ff, &p, seed.fork_named("product"))?;
    let diff = (on_joining.value - on_product.value).abs();
    let combined = (on_joining.stderr.powi(2) + on_product.stderr.powi(2)).sqrt();
    Ok(LiftReport {
        i,
        consistent: diff <= 3.0 * combined,
        joining: on_joining,
        product: on_product,
        diff,
        combined_stderr: combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SQRT2_MINUS_1;
    use crate::stats::ks_uniform;
    use std::f64::consts::TAU;

    fn rotation() -> System {
        System::new(&SystemSpec::rotation(SQRT2_MINUS_1.hi)).unwrap()
    }

    fn obs(spec: ObservableSpec, s: &System) -> Observable {
        Observable::on(&spec, s).unwrap()
    }

    fn x_of(s: &State) -> f64 {
        s.coords().unwrap()[0]
    }

    #[test]
    fn zprime_relation() {
        let mut rng = SeedStream::new(1).rng();
        for (a1, a2) in [(1, 2), (2, 4), (-3, 5), (6, -4)] {
            let z = ZPrimeSampler::new(&rotation(), a1, a2).unwrap();
            for _ in 0..1000 {
                let (z1, z2) = z.sample(&mut rng);
                assert!(z.residual(&z1, &z2) < 1e-9);
            }
        }
        let z = ZPrimeSampler::new(&rotation(), 2, 4).unwrap();
        assert_eq!(z.annihilator, (2, -1));
    }

    #[test]
    fn zprime_rejections() {
        let rational = System::new(&SystemSpec::rotation(0.25)).unwrap();
        assert!(matches!(
            ZPrimeSampler::new(&rational, 1, 2),
            Err(crate::Error::Unsupported(_))
        ));
        let cyc = System::new(&SystemSpec::cyclic(5)).unwrap();
        assert!(ZPrimeSampler::new(&cyc, 1, 2).is_err());
        assert!(ZPrimeSampler::new(&rotation(), 2, 2).is_err());
        assert!(ZPrimeSampler::new(&rotation(), 0, 2).is_err());
    }

    #[test]
    fn zprime_matches_orbit_moments() {
        let (a1, a2) = (1i64, 2i64);
        let n = 100_000;
        let alpha = SQRT2_MINUS_1;
        let orbit: Vec<(f64, f64)> = (1..=n)
            .map(|k| (alpha.frac_mul(a1 * k), alpha.frac_mul(a2 * k)))
            .collect();
        let z = ZPrimeSampler::new(&rotation(), a1, a2).unwrap();
        let mut rng = SeedStream::new(8).rng();
        let draws: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let (u, v) = z.sample(&mut rng);
                (u[0], v[0])
            })
            .collect();
        let moment = |pts: &[(f64, f64)], k: f64, m: f64| {
            let (re, im) = pts.iter().fold((0.0, 0.0), |(re, im), (u, v)| {
                let ph = TAU * (k * u + m * v);
                (re + ph.cos(), im + ph.sin())
            });
            (re / pts.len() as f64, im / pts.len() as f64)
        };
        for k in -3..=3 {
            for m in -3..=3 {
                let (r1, i1) = moment(&orbit, k as f64, m as f64);
                let (r2, i2) = moment(&draws, k as f64, m as f64);
                assert!(
                    ((r1 - r2).powi(2) + (i1 - i2).powi(2)).sqrt() < 0.02,
                    "k={k} m={m}"
                );
            }
        }
    }

    #[test]
    fn tilde_mu_on_rotation_bernoulli_skew() {
        let mut rng = SeedStream::new(3).rng();
        let s = TildeMuSampler::new(&rotation(), 1, 2).unwrap();
        for _ in 0..200 {
            let (x, a, b) = s.sample(&mut rng);
            assert!(s.relation_residual(&x, &a, &b).unwrap() < 1e-9);
        }

        let coin = System::new(&SystemSpec::coin()).unwrap();
        let s = TildeMuSampler::new(&coin, 1, 2).unwrap();
        let (x, a, b) = s.sample(&mut rng);
        assert!(x != a && a != b && x != b);

        let skew = System::new(&SystemSpec::skew_product(SQRT2_MINUS_1.hi)).unwrap();
        let s = TildeMuSampler::new(&skew, 1, 2).unwrap();
        let mut cols = vec![Vec::new(); 6];
        for _ in 0..5000 {
            let (x, a, b) = s.sample(&mut rng);
            assert!(s.relation_residual(&x, &a, &b).unwrap() < 1e-9);
            for (k, p) in [&x, &a, &b].iter().enumerate() {
                let c = p.coords().unwrap();
                cols[2 * k].push(c[0]);
                cols[2 * k + 1].push(c[1]);
            }
        }
        for c in &cols {
            assert!(ks_uniform(c) < 0.02);
        }
    }

    #[test]
    fn joining_is_shift_invariant() {
        let skew = System::new(&SystemSpec::skew_product(SQRT2_MINUS_1.hi)).unwrap();
        let j = TildeSystem::new(&skew, 1, 2).unwrap();
        let mut rng = SeedStream::new(4).rng();
        let mut cols = vec![Vec::new(); 3];
        for _ in 0..5000 {
            let p = j.jump(&j.sample_invariant(&mut rng), 7);
            let State::Tuple(parts) = &p else { panic!() };
            assert!(
                j.sampler
                    .relation_residual(&parts[0], &parts[1], &parts[2])
                    .unwrap()
                    < 1e-9
            );
            for (k, q) in parts.iter().enumerate() {
                cols[k].push(q.coords().unwrap()[1]);
            }
        }
        for c in &cols {
            assert!(ks_uniform(c) < 0.02);
        }
    }

    #[test]
    fn joining_decay_of_zero_functions() {
        let r = rotation();
        let zero = obs(ObservableSpec::constant(0.0), &r);
        let rep = joining_decay(&r, &zero, &zero, 1, 2, 1000, 4, SeedStream::new(1)).unwrap();
        assert!(rep.averages.iter().all(|&a| a == 0.0));
        assert!(rep.mean_abs_at(250).is_some());
    }

    #[test]
    fn rotation_contrast_does_not_decay() {
        let r = rotation();
        let f1 = obs(ObservableSpec::cos(2), &r);
        let f2 = obs(ObservableSpec::cos(1), &r);
        let rep = joining_decay(&r, &f1, &f2, 1, 2, 20_000, 64, SeedStream::new(2)).unwrap();
        assert!(rep.mean_abs > 0.1, "{}", rep.mean_abs);
    }

    #[test]
    fn generic_identity_cases() {
        let r = rotation();
        let one = obs(ObservableSpec::constant(1.0), &r);
        let rep = generic_point_check(
            &r,
            &one,
            &one,
            1,
            2,
            &State::point(0.3),
            100,
            10,
            SeedStream::new(1),
        )
        .unwrap();
        assert_eq!((rep.lhs, rep.rhs), (1.0, 1.0));

        let c1 = obs(ObservableSpec::cos(1), &r);
        let c2 = obs(ObservableSpec::cos(2), &r);
        let rep = generic_point_check(
            &r,
            &c1,
            &c1,
            1,
            2,
            &State::point(0.3),
            100_000,
            20_000,
            SeedStream::new(2),
        )
        .unwrap();
        assert!(rep.diff < 0.03, "{rep:?}");
        let rep = generic_point_check(
            &r,
            &c2,
            &c1,
            1,
            2,
            &State::point(0.0),
            100_000,
            20_000,
            SeedStream::new(3),
        )
        .unwrap();
        assert!((rep.lhs - 0.5).abs() < 0.01 && rep.diff < 0.03, "{rep:?}");
        let x = 0.2;
        let rep = generic_point_check(
            &r,
            &c2,
            &c1,
            1,
            2,
            &State::point(x),
            100_000,
            20_000,
            SeedStream::new(4),
        )
        .unwrap();
        assert!((rep.lhs - 0.5 * (TAU * x).cos()).abs() < 0.01, "{rep:?}");
        assert!(x_of(&rep.x) == x);
    }

    #[test]
    fn lift_matches_product_factor() {
        let r = rotation();
        let f = obs(ObservableSpec::cos(1), &r);
        let p = SeminormParams::new(1, 1, 8, 2000, Backend::MonteCarlo).with_m(400);
        for i in [1, 2] {
            let rep = lift_consistency(&r, &f, 1, 2, i, &p, SeedStream::new(6)).unwrap();
            assert!(rep.consistent, "{rep:?}");
            assert!((rep.product.value - 0.125f64.sqrt()).abs() < 0.03, "{rep:?}");
        }
    }
}
