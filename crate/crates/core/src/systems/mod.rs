//! The zoo of concrete measure-preserving systems.
//!
//! A [`System`] is built from a [`SystemSpec`] and exposes forward and
//! backward iteration (`jump` by any integer), a sampler for its invariant
//! measure, a declared Kronecker factor with its projection, and a sampler
//! for the fibre measures `μ_z` of the disintegration over that factor.

mod observable;
mod orbit;
mod spec;
mod state;

pub use observable::{Observable, ObservableSpec};
pub use orbit::{orbit, strided_values, OrbitBuffer};
pub use spec::{SystemSpec, UnionComponent};
pub use state::{KroneckerPoint, State};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{argument, unsupported, Result};
use crate::numeric::{frac, frac_mul_add, frac_mul_coord, gcd, Angle};
use crate::rng::mix64;

/// Largest denominator probed when deciding whether a rotation number is
/// rational.
const RATIONAL_PROBE_Q: u64 = 1000;
const RATIONAL_PROBE_TOL: f64 = 1e-12;

/// Anything that can be iterated and sampled.
///
/// Implemented by [`System`] and by the self-joining in
/// [`crate::extension`], so estimators work on both.
pub trait Dynamics: Send + Sync {
    /// `T^n x` for any integer `n`.
    fn jump(&self, x: &State, n: i64) -> State;

    /// One draw from the invariant measure.
    fn sample_invariant(&self, rng: &mut ChaCha8Rng) -> State;

    /// Whether `μ` is declared ergodic, so single orbits see the whole space.
    fn declared_ergodic(&self) -> bool;

    /// All states, when the space is finite and `μ` is uniform on them.
    fn finite_states(&self) -> Option<Vec<State>> {
        None
    }

    fn label(&self) -> String;
}

/// Compact group of a declared Kronecker factor together with the rotation.
#[derive(Debug, Clone, PartialEq)]
pub enum KroneckerGroup {
    Torus { alphas: Vec<Angle> },
    Cyclic { q: u64, step: u64 },
    Trivial,
    Product(Box<KroneckerGroup>, Box<KroneckerGroup>),
}

#[derive(Debug, Clone)]
enum Kind {
    Torus {
        alphas: Vec<Angle>,
    },
    Skew {
        alpha: Angle,
    },
    Bernoulli {
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
    Cyclic {
        q: u64,
    },
    Product(Box<System>, Box<System>),
    Power {
        base: Box<System>,
        c: i64,
    },
    Union {
        cumulative: Vec<f64>,
        components: Vec<System>,
    },
}

/// A concrete invertible measure-preserving system. Immutable once built.
#[derive(Debug, Clone)]
pub struct System {
    spec: SystemSpec,
    kind: Kind,
}

/// Build a system from its spec, validating the spec's invariants.
pub fn make_system(spec: &SystemSpec) -> Result<System> {
    System::new(spec)
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Symbol index at position `pos` of the sequence keyed by `seed`.
pub(crate) fn symbol_index(cumulative: &[f64], seed: u64, pos: i64) -> usize {
    let bits = mix64(seed ^ mix64(pos as u64));
    let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    pick(cumulative, u)
}

fn rotations_independent(alphas: &[Angle]) -> bool {
    if alphas.is_empty() {
        return false;
    }
    if alphas.len() == 1 {
        return !alphas[0].is_near_rational(RATIONAL_PROBE_Q, RATIONAL_PROBE_TOL);
    }
    // Probe small integer relations k·α ∈ ℤ with 0 < max|k_i| ≤ 6.
    const K: i64 = 6;
    let d = alphas.len();
    let mut ks = vec![-K; d];
    loop {
        if ks.iter().any(|&k| k != 0) {
            let s: f64 = ks.iter().zip(alphas).map(|(&k, a)| a.frac_mul(k)).sum::<f64>();
            let r = frac(s);
            if r.min(1.0 - r) < 1e-9 {
                return false;
            }
        }
        let mut i = 0;
        loop {
            if i == d {
                return true;
            }
            ks[i] += 1;
            if ks[i] <= K {
                break;
            }
            ks[i] = -K;
            i += 1;
        }
    }
}

impl System {
    pub fn new(spec: &SystemSpec) -> Result<System> {
        spec.validate()?;
        let kind = match spec {
            SystemSpec::Rotation { alpha } => Kind::Torus {
                alphas: vec![Angle::from_f64(*alpha)],
            },
            SystemSpec::TorusRotation { alphas } => Kind::Torus {
                alphas: alphas.iter().map(|a| Angle::from_f64(*a)).collect(),
            },
            SystemSpec::SkewProduct { alpha } => Kind::Skew {
                alpha: Angle::from_f64(*alpha),
            },
            SystemSpec::Bernoulli { symbol_values, probs } => Kind::Bernoulli {
                values: symbol_values.clone(),
                cumulative: cumulative(probs),
            },
            SystemSpec::Cyclic { q } => Kind::Cyclic { q: *q },
            SystemSpec::Product { left, right } => {
                Kind::Product(Box::new(System::new(left)?), Box::new(System::new(right)?))
            }
            SystemSpec::Power { base, c } => Kind::Power {
                base: Box::new(System::new(base)?),
                c: *c,
            },
            SystemSpec::Union { components } => Kind::Union {
                cumulative: cumulative(&components.iter().map(|c| c.weight).collect::<Vec<_>>()),
                components: components
                    .iter()
                    .map(|c| System::new(&c.system))
                    .collect::<Result<_>>()?,
            },
        };
        Ok(System {
            spec: spec.clone(),
            kind,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn step(&self, x: &State) -> State {
        self.jump(x, 1)
    }

    pub fn step_inv(&self, x: &State) -> State {
        self.jump(x, -1)
    }

    /// Every system in the zoo is invertible.
    pub fn invertible(&self) -> bool {
        true
    }

    /// Bernoulli alphabet, when this is a shift.
    pub(crate) fn alphabet(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            Kind::Bernoulli { values, cumulative } => Some((values, cumulative)),
            _ => None,
        }
    }

    pub(crate) fn components(&self) -> Option<&[System]> {
        match &self.kind {
            Kind::Union { components, .. } => Some(components),
            _ => None,
        }
    }

    pub(crate) fn factors(&self) -> Option<(&System, &System)> {
        match &self.kind {
            Kind::Product(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub(crate) fn power_base(&self) -> Option<&System> {
        match &self.kind {
            Kind::Power { base, .. } => Some(base),
            _ => None,
        }
    }

    pub(crate) fn cyclic_order(&self) -> Option<u64> {
        match &self.kind {
            Kind::Cyclic { q } => Some(*q),
            _ => None,
        }
    }

    /// Number of torus coordinates of a state, if the state space is a torus.
    pub(crate) fn torus_dim(&self) -> Option<usize> {
        match &self.kind {
            Kind::Torus { alphas } => Some(alphas.len()),
            Kind::Skew { .. } => Some(2),
            Kind::Power { base, .. } => base.torus_dim(),
            _ => None,
        }
    }

    fn weakly_mixing(&self) -> bool {
        match &self.kind {
            Kind::Bernoulli { values, .. } => values.len() > 1,
            Kind::Power { base, .. } => base.weakly_mixing(),
            Kind::Product(a, b) => a.weakly_mixing() && b.weakly_mixing(),
            _ => false,
        }
    }

    /// Rotation numbers when the system is a pure group rotation on a torus.
    fn rotation_angles(&self) -> Option<Vec<Angle>> {
        match &self.kind {
            Kind::Torus { alphas } => Some(alphas.clone()),
            Kind::Power { base, c } => base.rotation_angles().map(|alphas| {
                alphas
                    .iter()
                    .map(|a| Angle {
                        hi: a.frac_mul(*c),
                        lo: 0.0,
                    })
                    .collect()
            }),
            Kind::Product(a, b) => {
                let mut x = a.rotation_angles()?;
                x.extend(b.rotation_angles()?);
                Some(x)
            }
            _ => None,
        }
    }

    /// The declared Kronecker factor.
    pub fn kronecker_group(&self) -> Result<KroneckerGroup> {
        match &self.kind {
            Kind::Torus { alphas } => Ok(KroneckerGroup::Torus {
                alphas: alphas.clone(),
            }),
            Kind::Skew { alpha } => Ok(KroneckerGroup::Torus { alphas: vec![*alpha] }),
            Kind::Bernoulli { .. } => Ok(KroneckerGroup::Trivial),
            Kind::Cyclic { q } => Ok(KroneckerGroup::Cyclic { q: *q, step: 1 }),
            Kind::Product(a, b) => Ok(KroneckerGroup::Product(
                Box::new(a.kronecker_group()?),
                Box::new(b.kronecker_group()?),
            )),
            Kind::Power { base, c } => Ok(match base.kronecker_group()? {
                KroneckerGroup::Torus { alphas } => KroneckerGroup::Torus {
                    alphas: alphas
                        .iter()
                        .map(|a| Angle {
                            hi: a.frac_mul(*c),
                            lo: 0.0,
                        })
                        .collect(),
                },
                KroneckerGroup::Cyclic { q, step } => KroneckerGroup::Cyclic {
                    q,
                    step: (step as i128 * *c as i128).rem_euclid(q as i128) as u64,
                },
                other => other,
            }),
            Kind::Union { .. } => Err(unsupported(
                "finite unions are not ergodic and carry no single Kronecker factor",
            )),
        }
    }

    /// `π(x)`: projection onto the declared Kronecker factor.
    pub fn kronecker_project(&self, x: &State) -> Result<KroneckerPoint> {
        match (&self.kind, x) {
            (Kind::Torus { .. }, State::Torus(c)) => Ok(KroneckerPoint::Torus(c.clone())),
            (Kind::Skew { .. }, State::Torus(c)) => Ok(KroneckerPoint::Torus(vec![c[0]])),
            (Kind::Bernoulli { .. }, State::Symbolic { .. }) => Ok(KroneckerPoint::Trivial),
            (Kind::Cyclic { q }, State::Residue(j)) => Ok(KroneckerPoint::Residue { q: *q, j: *j }),
            (Kind::Product(a, b), State::Tuple(v)) if v.len() == 2 => Ok(KroneckerPoint::Pair(
                Box::new(a.kronecker_project(&v[0])?),
                Box::new(b.kronecker_project(&v[1])?),
            )),
            (Kind::Power { base, .. }, _) => base.kronecker_project(x),
            (Kind::Union { .. }, _) => Err(unsupported("no declared Kronecker factor for a union")),
            _ => Err(argument(format!(
                "state {x:?} does not belong to {}",
                self.label()
            ))),
        }
    }

    /// One draw from the fibre measure `μ_z`.
    pub fn sample_fiber(&self, z: &KroneckerPoint, rng: &mut ChaCha8Rng) -> Result<State> {
        match (&self.kind, z) {
            (Kind::Torus { alphas }, KroneckerPoint::Torus(t)) if t.len() == alphas.len() => {
                Ok(State::Torus(t.clone()))
            }
            (Kind::Skew { .. }, KroneckerPoint::Torus(t)) if t.len() == 1 => {
                Ok(State::Torus(vec![t[0], rng.gen::<f64>()]))
            }
            (Kind::Bernoulli { .. }, KroneckerPoint::Trivial) => Ok(self.sample_invariant(rng)),
            (Kind::Cyclic { q }, KroneckerPoint::Residue { q: zq, j }) if q == zq => Ok(State::Residue(*j)),
            (Kind::Product(a, b), KroneckerPoint::Pair(za, zb)) => {
                Ok(State::pair(a.sample_fiber(za, rng)?, b.sample_fiber(zb, rng)?))
            }
            (Kind::Power { base, .. }, _) => base.sample_fiber(z, rng),
            (Kind::Union { .. }, _) => Err(unsupported("no fibre sampler for a union")),
            _ => Err(argument(format!(
                "{z:?} is not a point of the Kronecker factor of {}",
                self.label()
            ))),
        }
    }
}

impl Dynamics for System {
    fn jump(&self, x: &State, n: i64) -> State {
        match (&self.kind, x) {
            (Kind::Torus { alphas }, State::Torus(c)) => State::Torus(
                c.iter()
                    .zip(alphas)
                    .map(|(&xi, a)| frac_mul_add(xi, n as f64, a.hi, a.lo))
                    .collect(),
            ),
            (Kind::Skew { alpha }, State::Torus(c)) => {
                // T^n(x, y) = (x + nα, y + n·x + n(n−1)/2·α)
                let (x0, y0) = (c[0], c[1]);
                let tri = (n as i128 * (n as i128 - 1) / 2) as f64;
                let y1 = frac_mul_coord(y0, n as f64, x0);
                let y = frac_mul_add(y1, tri, alpha.hi, alpha.lo);
                State::Torus(vec![frac_mul_add(x0, n as f64, alpha.hi, alpha.lo), y])
            }
            (Kind::Bernoulli { .. }, State::Symbolic { seed, offset }) => State::Symbolic {
                seed: *seed,
                offset: offset + n,
            },
            (Kind::Cyclic { q }, State::Residue(j)) => {
                State::Residue((*j as i128 + n as i128).rem_euclid(*q as i128) as u64)
            }
            (Kind::Product(a, b), State::Tuple(v)) => State::pair(a.jump(&v[0], n), b.jump(&v[1], n)),
            (Kind::Power { base, c }, _) => base.jump(x, n * c),
            (Kind::Union { components, .. }, State::Component { index, state }) => State::Component {
                index: *index,
                state: Box::new(components[*index].jump(state, n)),
            },
            _ => panic!("state {x:?} does not belong to {}", self.label()),
        }
    }

    fn sample_invariant(&self, rng: &mut ChaCha8Rng) -> State {
        match &self.kind {
            Kind::Torus { alphas } => State::Torus(alphas.iter().map(|_| rng.gen::<f64>()).collect()),
            Kind::Skew { .. } => State::Torus(vec![rng.gen::<f64>(), rng.gen::<f64>()]),
            Kind::Bernoulli { .. } => State::Symbolic {
                seed: rng.gen(),
                offset: 0,
            },
            Kind::Cyclic { q } => State::Residue(rng.gen_range(0..*q)),
            Kind::Product(a, b) => {
                let l = a.sample_invariant(rng);
                State::pair(l, b.sample_invariant(rng))
            }
            Kind::Power { base, .. } => base.sample_invariant(rng),
            Kind::Union {
                cumulative,
                components,
            } => {
                let index = pick(cumulative, rng.gen::<f64>());
                State::Component {
                    index,
                    state: Box::new(components[index].sample_invariant(rng)),
                }
            }
        }
    }

    fn declared_ergodic(&self) -> bool {
        if let Some(alphas) = self.rotation_angles() {
            return rotations_independent(&alphas);
        }
        match &self.kind {
            Kind::Skew { alpha } => !alpha.is_near_rational(RATIONAL_PROBE_Q, RATIONAL_PROBE_TOL),
            Kind::Bernoulli { .. } => true,
            Kind::Cyclic { .. } => true,
            Kind::Power { base, c } => match &base.kind {
                Kind::Cyclic { q } => gcd(c.unsigned_abs(), *q) == 1,
                Kind::Skew { alpha } => !Angle {
                    hi: alpha.frac_mul(*c),
                    lo: 0.0,
                }
                .is_near_rational(RATIONAL_PROBE_Q, RATIONAL_PROBE_TOL),
                _ => base.weakly_mixing(),
            },
            Kind::Product(a, b) => {
                if let (Some(p), Some(q)) = (a.cyclic_order(), b.cyclic_order()) {
                    return gcd(p, q) == 1;
                }
                (a.weakly_mixing() && b.declared_ergodic()) || (b.weakly_mixing() && a.declared_ergodic())
            }
            Kind::Union { components, .. } => components.len() == 1 && components[0].declared_ergodic(),
            Kind::Torus { .. } => unreachable!(),
        }
    }

    fn finite_states(&self) -> Option<Vec<State>> {
        match &self.kind {
            Kind::Cyclic { q } => Some((0..*q).map(State::Residue).collect()),
            Kind::Power { base, .. } => base.finite_states(),
            Kind::Product(a, b) => {
                let (sa, sb) = (a.finite_states()?, b.finite_states()?);
                Some(
                    sa.iter()
                        .flat_map(|x| sb.iter().map(move |y| State::pair(x.clone(), y.clone())))
                        .collect(),
                )
            }
            _ => None,
        }
    }

    fn label(&self) -> String {
        match &self.spec {
            SystemSpec::Rotation { alpha } => format!("rotation({alpha})"),
            SystemSpec::TorusRotation { alphas } => format!("torus_rotation({alphas:?})"),
            SystemSpec::SkewProduct { alpha } => format!("skew_product({alpha})"),
            SystemSpec::Bernoulli { symbol_values, .. } => format!("bernoulli({symbol_values:?})"),
            SystemSpec::Cyclic { q } => format!("cyclic({q})"),
            SystemSpec::Product { .. } => {
                let (a, b) = self.factors().expect("product");
                format!("{}x{}", a.label(), b.label())
            }
            SystemSpec::Power { c, .. } => {
                format!("({})^{c}", self.power_base().expect("power").label())
            }
            SystemSpec::Union { components } => format!("union[{}]", components.len()),
        }
    }
}
