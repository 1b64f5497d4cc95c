//! A laboratory for quantitative ergodic theory.
//!
//! The crate realizes a small zoo of invertible measure-preserving systems
//! (circle and torus rotations, a two-step skew product, two-sided Bernoulli
//! shifts, cyclic permutations, and products, powers and finite unions of
//! these) and builds on them:
//!
//! * [`averages`]: Birkhoff, bilinear and weighted ergodic averages with
//!   running convergence profiles, plus a finitary van der Corput checker;
//! * [`seminorms`]: estimators for the uniformity seminorms `U^l(T, c)` and
//!   checkers for the multilinear-average and product-system inequalities;
//! * [`criterion`]: weights `c_n = f1(T^{a1 n} x) f2(T^{a2 n} x)` and the
//!   orthogonality criterion on the correlation sets `S_{δ,L,R}`;
//! * [`extension`]: the conditionally independent three-fold self-joining
//!   over the Kronecker factor, with decay and generic-point experiments.
//!
//! Everything is deterministic for a fixed seed regardless of the size of the
//! rayon thread pool.

pub mod averages;
pub mod criterion;
pub mod error;
pub mod extension;
pub mod numeric;
pub mod rng;
pub mod seminorms;
pub mod stats;
pub mod systems;

pub use error::{Error, Result};
pub use rng::SeedStream;
pub use systems::{Dynamics, Observable, ObservableSpec, State, System, SystemSpec};
