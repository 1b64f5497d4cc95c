use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{symbol_index, State, System, SystemSpec};
use crate::error::{config, Result};

/// Declarative description of a bounded observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Constant {
        value: f64,
    },
    /// Torus coordinate `index`, the residue of a cyclic system, or the
    /// symbol value at position `index` of a Bernoulli sequence.
    Coordinate {
        #[serde(default)]
        index: usize,
    },
    /// `cos(2π·freq·θ)` where `θ` is torus coordinate `coord` or `j/q`.
    Cos {
        #[serde(default = "one")]
        freq: i64,
        #[serde(default)]
        coord: usize,
    },
    /// `sin(2π·freq·θ)`, same angle convention as `Cos`.
    Sin {
        #[serde(default = "one")]
        freq: i64,
        #[serde(default)]
        coord: usize,
    },
    /// `1_{j = residue}` on a cyclic system.
    Indicator {
        residue: u64,
    },
    /// `f(j) = values[j]` on a cyclic system.
    Table {
        values: Vec<f64>,
    },
    /// `f_0 ⊗ f_1 ⊗ …` on a product (one factor per component).
    Tensor {
        factors: Vec<ObservableSpec>,
    },
}

fn one() -> i64 {
    1
}

impl ObservableSpec {
    pub fn constant(value: f64) -> Self {
        ObservableSpec::Constant { value }
    }

    pub fn coordinate(index: usize) -> Self {
        ObservableSpec::Coordinate { index }
    }

    pub fn cos(freq: i64) -> Self {
        ObservableSpec::Cos { freq, coord: 0 }
    }

    pub fn tensor(factors: Vec<ObservableSpec>) -> Self {
        ObservableSpec::Tensor { factors }
    }
}

#[derive(Debug, Clone, Copy)]
enum AngleSource {
    Coord(usize),
    Residue(u64),
}

#[derive(Debug, Clone)]
enum Rule {
    Constant(f64),
    TorusCoord(usize),
    Residue,
    Symbol {
        index: i64,
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
    Cos(i64, AngleSource),
    Sin(i64, AngleSource),
    Table(Vec<f64>),
    Tensor(Vec<Rule>),
    PerComponent(Vec<Rule>),
}

/// A bounded real observable resolved against a concrete system.
#[derive(Debug, Clone)]
pub struct Observable {
    name: String,
    rule: Rule,
    sup_bound: f64,
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn describe(spec: &ObservableSpec) -> String {
    match spec {
        ObservableSpec::Constant { value } => format!("{value}"),
        ObservableSpec::Coordinate { index } => format!("x{index}"),
        ObservableSpec::Cos { freq, coord } => format!("cos(2π·{freq}·x{coord})"),
        ObservableSpec::Sin { freq, coord } => format!("sin(2π·{freq}·x{coord})"),
        ObservableSpec::Indicator { residue } => format!("1[j={residue}]"),
        ObservableSpec::Table { values } => format!("table{values:?}"),
        ObservableSpec::Tensor { factors } => factors.iter().map(describe).collect::<Vec<_>>().join("⊗"),
    }
}

fn resolve(spec: &ObservableSpec, system: &System) -> Result<(Rule, f64)> {
    if let Some(components) = system.components() {
        let mut rules = Vec::with_capacity(components.len());
        let mut bound = 0.0f64;
        for c in components {
            let (r, b) = resolve(spec, c)?;
            rules.push(r);
            bound = bound.max(b);
        }
        return Ok((Rule::PerComponent(rules), bound));
    }
    if let Some(base) = system.power_base() {
        return resolve(spec, base);
    }
    let mismatch = || {
        config(format!(
            "observable {} is not defined on {}",
            describe(spec),
            crate::systems::Dynamics::label(system)
        ))
    };
    match spec {
        ObservableSpec::Constant { value } => Ok((Rule::Constant(*value), value.abs())),
        ObservableSpec::Coordinate { index } => {
            if let Some(d) = system.torus_dim() {
                if *index < d {
                    return Ok((Rule::TorusCoord(*index), 1.0));
                }
            } else if let Some(q) = system.cyclic_order() {
                if *index == 0 {
                    return Ok((Rule::Residue, (q - 1) as f64));
                }
            } else if let Some((values, cumulative)) = system.alphabet() {
                let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                return Ok((
                    Rule::Symbol {
                        index: *index as i64,
                        values: values.to_vec(),
                        cumulative: cumulative.to_vec(),
                    },
                    bound,
                ));
            }
            Err(mismatch())
        }
        ObservableSpec::Cos { freq, coord } | ObservableSpec::Sin { freq, coord } => {
            let source = if let Some(d) = system.torus_dim() {
                if *coord >= d {
                    return Err(mismatch());
                }
                AngleSource::Coord(*coord)
            } else if let Some(q) = system.cyclic_order() {
                if *coord != 0 {
                    return Err(mismatch());
                }
                AngleSource::Residue(q)
            } else {
                return Err(mismatch());
            };
            let rule = if matches!(spec, ObservableSpec::Cos { .. }) {
                Rule::Cos(*freq, source)
            } else {
                Rule::Sin(*freq, source)
            };
            Ok((rule, 1.0))
        }
        ObservableSpec::Indicator { residue } => {
            let q = system.cyclic_order().ok_or_else(mismatch)?;
            if *residue >= q {
                return Err(config(format!("residue {residue} out of range for q = {q}")));
            }
            let mut table = vec![0.0; q as usize];
            table[*residue as usize] = 1.0;
            Ok((Rule::Table(table), 1.0))
        }
        ObservableSpec::Table { values } => {
            let q = system.cyclic_order().ok_or_else(mismatch)?;
            if values.len() as u64 != q {
                return Err(config(format!(
                    "table has {} entries but the cyclic system has q = {q}",
                    values.len()
                )));
            }
            let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok((Rule::Table(values.clone()), bound))
        }
        ObservableSpec::Tensor { factors } => {
            let (a, b) = system.factors().ok_or_else(mismatch)?;
            if factors.len() != 2 {
                return Err(config(
                    "a tensor observable on a product needs exactly two factors",
                ));
            }
            let (ra, ba) = resolve(&factors[0], a)?;
            let (rb, bb) = resolve(&factors[1], b)?;
            Ok((Rule::Tensor(vec![ra, rb]), ba * bb))
        }
    }
}

fn angle(source: AngleSource, x: &State) -> f64 {
    match (source, x) {
        (AngleSource::Coord(i), State::Torus(c)) => c[i],
        (AngleSource::Residue(q), State::Residue(j)) => *j as f64 / q as f64,
        _ => panic!("observable evaluated on a foreign state {x:?}"),
    }
}

fn eval_rule(rule: &Rule, x: &State) -> f64 {
    match rule {
        Rule::Constant(v) => *v,
        Rule::TorusCoord(i) => match x {
            State::Torus(c) => c[*i],
            _ => panic!("observable evaluated on a foreign state {x:?}"),
        },
        Rule::Residue => match x {
            State::Residue(j) => *j as f64,
            _ => panic!("observable evaluated on a foreign state {x:?}"),
        },
        Rule::Symbol {
            index,
            values,
            cumulative,
        } => match x {
            State::Symbolic { seed, offset } => values[symbol_index(cumulative, *seed, offset + index)],
            _ => panic!("observable evaluated on a foreign state {x:?}"),
        },
        Rule::Cos(k, s) => (TAU * (*k as f64) * angle(*s, x)).cos(),
        Rule::Sin(k, s) => (TAU * (*k as f64) * angle(*s, x)).sin(),
        Rule::Table(t) => match x {
            State::Residue(j) => t[*j as usize],
            _ => panic!("observable evaluated on a foreign state {x:?}"),
        },
        Rule::Tensor(rules) => match x {
            State::Tuple(parts) => rules
                .iter()
                .zip(parts)
                .fold(1.0, |acc, (r, p)| acc * eval_rule(r, p)),
            _ => panic!("observable evaluated on a foreign state {x:?}"),
        },
        Rule::PerComponent(rules) => match x {
            State::Component { index, state } => eval_rule(&rules[*index], state),
            _ => panic!("observable evaluated on a foreign state {x:?}"),
        },
    }
}

impl Observable {
    /// Resolve `spec` on the system described by `system`.
    pub fn new(spec: &ObservableSpec, system: &SystemSpec) -> Result<Observable> {
        Observable::on(spec, &System::new(system)?)
    }

    /// Resolve `spec` on an already built system.
    pub fn on(spec: &ObservableSpec, system: &System) -> Result<Observable> {
        let (rule, sup_bound) = resolve(spec, system)?;
        Ok(Observable {
            name: describe(spec),
            rule,
            sup_bound,
        })
    }

    /// `F(x_0, x_1, …) = Π f_i(x_i)` on a tuple state.
    pub fn tensor(factors: Vec<Observable>) -> Observable {
        Observable {
            name: factors
                .iter()
                .map(|f| f.name.clone())
                .collect::<Vec<_>>()
                .join("⊗"),
            sup_bound: factors.iter().map(|f| f.sup_bound).product(),
            rule: Rule::Tensor(factors.into_iter().map(|f| f.rule).collect()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// `f(x)`. Panics if `x` is not a state of the system the observable
    /// was resolved on.
    pub fn eval(&self, x: &State) -> f64 {
        eval_rule(&self.rule, x)
    }

    /// Whether the observable is the constant `value`.
    pub fn is_constant(&self) -> Option<f64> {
        match self.rule {
            Rule::Constant(v) => Some(v),
            _ => None,
        }
    }
}
