use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Declarative description of a measure-preserving system.
///
/// All variants are invertible. Rotation numbers are reduced mod 1 when the
/// system is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `x ↦ x + α` on the circle.
    Rotation { alpha: f64 },
    /// `x ↦ x + α` on the `d`-torus, coordinatewise.
    TorusRotation { alphas: Vec<f64> },
    /// `(x, y) ↦ (x + α, y + x)` on the 2-torus.
    SkewProduct { alpha: f64 },
    /// Two-sided shift over a finite alphabet with product measure.
    Bernoulli {
        symbol_values: Vec<f64>,
        probs: Vec<f64>,
    },
    /// `j ↦ j + 1 mod q` with uniform measure.
    Cyclic { q: u64 },
    /// `T × S` with the product measure.
    Product {
        left: Box<SystemSpec>,
        right: Box<SystemSpec>,
    },
    /// `T^c`.
    Power { base: Box<SystemSpec>, c: i64 },
    /// Finite disjoint union; component `i` carries mass `weight_i`.
    Union { components: Vec<UnionComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionComponent {
    pub weight: f64,
    pub system: SystemSpec,
}

impl SystemSpec {
    pub fn rotation(alpha: f64) -> Self {
        SystemSpec::Rotation { alpha }
    }

    pub fn skew_product(alpha: f64) -> Self {
        SystemSpec::SkewProduct { alpha }
    }

    pub fn cyclic(q: u64) -> Self {
        SystemSpec::Cyclic { q }
    }

    /// Fair ±1 coin.
    pub fn coin() -> Self {
        SystemSpec::Bernoulli {
            symbol_values: vec![1.0, -1.0],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn product(left: SystemSpec, right: SystemSpec) -> Self {
        SystemSpec::Product {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn power(base: SystemSpec, c: i64) -> Self {
        SystemSpec::Power {
            base: Box::new(base),
            c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SystemSpec::Rotation { alpha } | SystemSpec::SkewProduct { alpha } => {
                if !alpha.is_finite() {
                    return Err(config(format!("rotation number {alpha} is not finite")));
                }
            }
            SystemSpec::TorusRotation { alphas } => {
                if alphas.is_empty() {
                    return Err(config("torus rotation needs at least one coordinate"));
                }
                if let Some(a) = alphas.iter().find(|a| !a.is_finite()) {
                    return Err(config(format!("rotation number {a} is not finite")));
                }
            }
            SystemSpec::Bernoulli { symbol_values, probs } => {
                if symbol_values.is_empty() || symbol_values.len() != probs.len() {
                    return Err(config(format!(
                        "bernoulli needs matching non-empty symbol_values and probs (got {} and {})",
                        symbol_values.len(),
                        probs.len()
                    )));
                }
                if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                    return Err(config("bernoulli probabilities must be non-negative"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(config(format!("bernoulli probabilities sum to {total}, not 1")));
                }
                if symbol_values.iter().any(|v| !v.is_finite()) {
                    return Err(config("bernoulli symbol values must be finite"));
                }
            }
            SystemSpec::Cyclic { q } => {
                if *q == 0 {
                    return Err(config("cyclic system needs q >= 1"));
                }
            }
            SystemSpec::Product { left, right } => {
                left.validate()?;
                right.validate()?;
            }
            SystemSpec::Power { base, c } => {
                if *c == 0 {
                    return Err(config("power exponent must be non-zero"));
                }
                base.validate()?;
            }
            SystemSpec::Union { components } => {
                if components.is_empty() {
                    return Err(config("union needs at least one component"));
                }
                if components.iter().any(|c| !(c.weight > 0.0)) {
                    return Err(config("union weights must be positive"));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(config(format!("union weights sum to {total}, not 1")));
                }
                for c in components {
                    c.system.validate()?;
                }
            }
        }
        Ok(())
    }
}
