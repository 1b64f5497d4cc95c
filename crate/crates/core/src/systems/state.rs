use serde::{Deserialize, Serialize};

/// A point of a system's state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    /// Torus coordinates, each in `[0, 1)`. Rotations use one coordinate,
    /// the skew product two.
    Torus(Vec<f64>),
    /// A bi-infinite symbol sequence `ω` given by a seeded oracle, shifted by
    /// `offset`: coordinate `k` of the state is `ω_{offset + k}`.
    Symbolic { seed: u64, offset: i64 },
    /// A residue `j mod q`.
    Residue(u64),
    /// A point of a product (two entries) or of a self-joining.
    Tuple(Vec<State>),
    /// A point of component `index` of a finite disjoint union.
    Component { index: usize, state: Box<State> },
}

impl State {
    pub fn point(x: f64) -> State {
        State::Torus(vec![x])
    }

    pub fn pair(a: State, b: State) -> State {
        State::Tuple(vec![a, b])
    }

    /// Torus coordinates, if this is a torus point.
    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            State::Torus(c) => Some(c),
            _ => None,
        }
    }
}

/// A point of a declared Kronecker factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KroneckerPoint {
    Torus(Vec<f64>),
    Residue {
        q: u64,
        j: u64,
    },
    /// The one-point factor of a weakly mixing system.
    Trivial,
    Pair(Box<KroneckerPoint>, Box<KroneckerPoint>),
}

impl KroneckerPoint {
    /// Group translation by a torus element of matching dimension.
    pub fn translate(&self, t: &[f64]) -> KroneckerPoint {
        match self {
            KroneckerPoint::Torus(z) => KroneckerPoint::Torus(
                z.iter()
                    .zip(t)
                    .map(|(a, b)| crate::numeric::frac(a + b))
                    .collect(),
            ),
            other => other.clone(),
        }
    }
}
