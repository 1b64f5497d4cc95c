use std::path::Path;

use ergolab::seminorms::Backend;
use ergolab::{ObservableSpec, State, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Seminorm,
    Criterion,
    Rtt,
    Vdc,
    Extension,
    Generic,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Seminorm => "seminorm",
            Experiment::Criterion => "criterion",
            Experiment::Rtt => "rtt",
            Experiment::Vdc => "vdc",
            Experiment::Extension => "extension",
            Experiment::Generic => "generic",
        }
    }
}

/// One target `(Y, S, g)` of a return-times run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub system: SystemSpec,
    pub g: ObservableSpec,
    #[serde(default = "default_y_samples")]
    pub y_samples: usize,
}

fn default_y_samples() -> usize {
    20
}

/// Every key any experiment understands. Keys an experiment does not use
/// are ignored; keys nobody knows are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,

    pub system: Option<SystemSpec>,
    pub observable: Option<ObservableSpec>,
    pub f1: Option<ObservableSpec>,
    pub f2: Option<ObservableSpec>,
    pub a1: Option<i64>,
    pub a2: Option<i64>,
    pub x: Option<State>,

    pub n: Option<usize>,
    pub h: Option<usize>,
    pub h_schedule: Option<Vec<usize>>,
    pub limsup_schedule: Option<Vec<usize>>,
    pub m: Option<usize>,
    pub level: Option<u32>,
    pub c: Option<i64>,
    pub backend: Option<Backend>,
    pub batches: Option<usize>,

    pub deltas: Option<Vec<f64>>,
    pub schedule: Option<Vec<(usize, usize)>>,
    pub horizon: Option<usize>,
    pub tol: Option<f64>,
    pub oscillation_tol: Option<f64>,
    pub targets: Option<Vec<Target>>,

    pub samples: Option<usize>,
    pub mc: Option<usize>,
    pub points: Option<usize>,

    pub sequences: Option<usize>,
    pub dim: Option<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, Failure> {
        toml::from_str(text).map_err(|e| Failure::Config(format!("invalid config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<(Config, Vec<u8>), Failure> {
        let bytes = std::fs::read(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Failure::Config(format!("{} is not UTF-8", path.display())))?;
        Ok((Config::parse(text)?, bytes))
    }
}

pub fn required<T: Clone>(value: &Option<T>, key: &str, exp: Experiment) -> Result<T, Failure> {
    value
        .clone()
        .ok_or_else(|| Failure::Config(format!("missing key `{key}` for experiment `{}`", exp.name())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_seminorm_config() {
        let c = Config::parse(
            r#"
            experiment = "seminorm"
            seed = 3
            level = 2
            h = 64
            n = 1000
            backend = "monte_carlo"
            [system]
            kind = "rotation"
            alpha = 0.41421356237309503
            [observable]
            kind = "cos"
            freq = 1
            "#,
        )
        .unwrap();
        assert_eq!(c.experiment, Some(Experiment::Seminorm));
        assert_eq!(c.backend, Some(Backend::MonteCarlo));
        assert_eq!(c.system, Some(SystemSpec::rotation(0.41421356237309503)));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = Config::parse("systme = 1\n").unwrap_err();
        let Failure::Config(msg) = err else { panic!() };
        assert!(msg.contains("systme"), "{msg}");
        let err = Config::parse("[system]\nkind = \"rotation\"\nalpah = 0.3\n").unwrap_err();
        let Failure::Config(msg) = err else { panic!() };
        assert!(msg.contains("alpah"), "{msg}");
    }

    #[test]
    fn targets_and_schedule() {
        let c = Config::parse(
            r#"
            schedule = [[100, 1000], [1000, 1000]]
            [[targets]]
            system = { kind = "cyclic", q = 5 }
            g = { kind = "cos" }
            y_samples = 3
            "#,
        )
        .unwrap();
        assert_eq!(c.schedule, Some(vec![(100, 1000), (1000, 1000)]));
        assert_eq!(c.targets.unwrap()[0].y_samples, 3);
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let (c, _) = Config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                assert!(c.experiment.is_some(), "{}", path.display());
                seen += 1;
            }
        }
        assert!(seen >= 6);
    }

    #[test]
    fn states_parse() {
        let c = Config::parse("x = { torus = [0.25] }\n").unwrap();
        assert_eq!(c.x, Some(State::point(0.25)));
        let c = Config::parse("x = { symbolic = { seed = 4, offset = 0 } }\n").unwrap();
        assert_eq!(c.x, Some(State::Symbolic { seed: 4, offset: 0 }));
    }
}
