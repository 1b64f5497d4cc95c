//! Summation and circle arithmetic.

use serde::{Deserialize, Serialize};

/// Leaf size of the pairwise summation tree.
pub const PAIRWISE_BLOCK: usize = 4096;

/// Pairwise sum with a fixed reduction tree: leaves of at most
/// [`PAIRWISE_BLOCK`] elements summed left to right, then halves combined.
/// The tree only depends on the length, so the result is reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of an elementwise product without materializing it.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BLOCK {
        return a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y);
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Reduce to `[0, 1)`.
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A rotation number stored as an unevaluated sum `hi + lo`.
///
/// Long orbits evaluate `x + n·α mod 1` directly from the double-double
/// representation, so the error at `n = 10^7` stays near `1e-16` instead of
/// growing linearly as it would with iterated addition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub hi: f64,
    pub lo: f64,
}

/// `√2 − 1`, rounded once from a 50-digit value.
pub const SQRT2_MINUS_1: Angle = Angle {
    hi: 0.41421356237309503,
    lo: 1.4349369327986523e-17,
};

/// `(√5 − 1) / 2`, rounded once from a 50-digit value.
pub const GOLDEN_CONJUGATE: Angle = Angle {
    hi: 0.6180339887498949,
    lo: -5.432115203682506e-17,
};

impl Angle {
    /// Wrap an `f64`. The high-precision constants are recognized by their
    /// leading double and get their low word back.
    pub fn from_f64(alpha: f64) -> Angle {
        let a = frac(alpha);
        for known in [SQRT2_MINUS_1, GOLDEN_CONJUGATE] {
            if a == known.hi {
                return known;
            }
        }
        Angle { hi: a, lo: 0.0 }
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }

    /// `frac(k · α)` for an integer multiplier `|k| < 2^53`.
    pub fn frac_mul(&self, k: i64) -> f64 {
        frac_mul_add(0.0, k as f64, self.hi, self.lo)
    }

    /// Rational with denominator at most `max_q`, up to `tol`.
    pub fn is_near_rational(&self, max_q: u64, tol: f64) -> bool {
        (1..=max_q).any(|q| {
            let r = self.frac_mul(q as i64);
            r.min(1.0 - r) < tol
        })
    }
}

/// `frac(base + k·(hi + lo))` with the product `k·hi` split exactly by FMA.
/// `k` must be an exactly representable integer.
pub fn frac_mul_add(base: f64, k: f64, hi: f64, lo: f64) -> f64 {
    let p = k * hi;
    let e = k.mul_add(hi, -p);
    let l = k * lo;
    let pf = p - p.floor();
    frac(frac(pf + base) + (e + l))
}

/// `frac(y + k·x)` for an `f64` coordinate `x`, exact up to the final rounding.
pub fn frac_mul_coord(y: f64, k: f64, x: f64) -> f64 {
    frac_mul_add(y, k, x, 0.0)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Circular distance on `[0, 1)`.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = frac(a - b);
    d.min(1.0 - d)
}
