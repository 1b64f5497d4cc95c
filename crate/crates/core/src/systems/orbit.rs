use rayon::prelude::*;

use super::{Dynamics, Observable, State, System};
use crate::error::{argument, unsupported, Result};

/// Below this many points orbits are generated on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;
const CHUNK: usize = 1 << 12;

/// Values `f(T^n x)` for `n` in `[n_lo, n_hi]`.
#[derive(Debug, Clone)]
pub struct OrbitBuffer {
    pub n_lo: i64,
    pub n_hi: i64,
    pub values: Vec<f64>,
    pub system: String,
    pub observable: String,
    pub start: State,
}

impl OrbitBuffer {
    /// `f(T^n x)`; `n` must lie in the window.
    pub fn at(&self, n: i64) -> f64 {
        self.values[(n - self.n_lo) as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `f(T^{stride·n} x)` for `n` in `[n_from, n_to]`.
///
/// Each point is computed by a direct jump from `x`, so results do not
/// depend on how the range is split across threads.
pub fn strided_values(
    system: &dyn Dynamics,
    x: &State,
    stride: i64,
    n_from: i64,
    n_to: i64,
    f: &Observable,
) -> Vec<f64> {
    if n_to < n_from {
        return Vec::new();
    }
    let len = (n_to - n_from + 1) as usize;
    let eval = |k: usize| f.eval(&system.jump(x, stride * (n_from + k as i64)));
    if len < PAR_THRESHOLD {
        return (0..len).map(eval).collect();
    }
    let mut out = vec![0.0; len];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = eval(c * CHUNK + i);
        }
    });
    out
}

/// Orbit of `x` under `system` observed through `f` on `[n_lo, n_hi]`.
pub fn orbit(system: &System, x: &State, n_lo: i64, n_hi: i64, f: &Observable) -> Result<OrbitBuffer> {
    if n_lo > n_hi {
        return Err(argument(format!("empty orbit window [{n_lo}, {n_hi}]")));
    }
    if n_lo < 0 && !system.invertible() {
        return Err(unsupported("negative times on a non-invertible system"));
    }
    Ok(OrbitBuffer {
        n_lo,
        n_hi,
        values: strided_values(system, x, 1, n_lo, n_hi, f),
        system: system.label(),
        observable: f.name().to_string(),
        start: x.clone(),
    })
}
