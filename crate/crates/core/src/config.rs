//! Scenario files and seed lists.
//!
//! A scenario file is TOML:
//!
//! ```toml
//! name = "at1-tight"
//! model = "at"
//! spec = "alw_[0,30] (rpm <= 2300) /\\ alw_[0,30] (speed <= 60) /\\ ev_[0,30] (gear >= 3)"
//!
//! [params]            # optional model parameter overrides
//! upshift_rpm = 1650.0
//!
//! [inputs]            # optional; defaults to the model's own parameterization
//! horizon = 30.0
//! sample_step = 0.1
//! [[inputs.variables]]
//! name = "throttle"
//! lower = 0.0
//! upper = 100.0
//! control_points = 5
//! [[inputs.variables]]
//! name = "brake"
//! lower = 0.0
//! upper = 325.0
//! control_points = 5
//!
//! [defaults]          # optional; command-line flags take precedence
//! budget = 3000
//! timeout = 600.0
//! lambda = 10
//! objective = 1
//! seeds = "1..20"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{build_model, check_spec, find_scenario, Scenario};
use crate::signals::InputSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDefaults {
    pub budget: Option<usize>,
    /// Seconds.
    pub timeout: Option<f64>,
    pub lambda: Option<usize>,
    pub objective: Option<usize>,
    pub seeds: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    description: Option<String>,
    model: String,
    spec: String,
    params: Option<toml::Table>,
    inputs: Option<InputSpec>,
    #[serde(default)]
    defaults: ScenarioDefaults,
}

/// A scenario together with the run defaults it declares.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub defaults: ScenarioDefaults,
}

pub fn parse_scenario(text: &str) -> Result<LoadedScenario, ConfigError> {
    let file: ScenarioFile = toml::from_str(text)?;
    let model = build_model(&file.model, file.params.as_ref()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let input = file.inputs.unwrap_or_else(|| model.input_spec());
    input.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if input.names() != model.input_spec().names() {
        return Err(ConfigError::Invalid(format!(
            "model `{}` takes inputs {:?}",
            file.model,
            model.input_spec().names()
        )));
    }
    check_spec(model.as_ref(), &input, &file.spec).map_err(ConfigError::Invalid)?;
    let d = &file.defaults;
    if let Some(seeds) = &d.seeds {
        parse_seeds(seeds)?;
    }
    if matches!(d.timeout, Some(t) if t.is_nan() || t <= 0.0) {
        return Err(ConfigError::Invalid("timeout must be positive".into()));
    }
    if d.lambda == Some(0) || d.lambda == Some(1) {
        return Err(ConfigError::Invalid("lambda must be at least 2".into()));
    }
    Ok(LoadedScenario {
        scenario: Scenario {
            name: file.name.unwrap_or_else(|| file.model.clone()),
            description: file.description.unwrap_or_default(),
            model,
            spec: file.spec,
            input,
            budget: d.budget.unwrap_or(3000),
        },
        defaults: file.defaults,
    })
}

/// A built-in scenario name, or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<LoadedScenario, ConfigError> {
    if let Some(scenario) = find_scenario(name_or_path) {
        return Ok(LoadedScenario {
            scenario,
            defaults: ScenarioDefaults::default(),
        });
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(ConfigError::Invalid(format!(
            "`{name_or_path}` is neither a built-in scenario nor a file"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: name_or_path.to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// `a..b` (inclusive), a comma-separated list, or a single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::Invalid(format!("bad seed list `{text}`"));
    let text = text.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b || b - a >= 1_000_000 {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("1..20").unwrap(), (1..=20).collect::<Vec<_>>());
        assert_eq!(parse_seeds("3..=4").unwrap(), vec![3, 4]);
        assert_eq!(parse_seeds("5, 7,9").unwrap(), vec![5, 7, 9]);
        assert_eq!(parse_seeds("42").unwrap(), vec![42]);
        for bad in ["", "4..2", "a..b", "1,,2", "-1", "0..99999999"] {
            assert!(parse_seeds(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn minimal_file_uses_model_inputs() {
        let s = parse_scenario("model = \"corner\"\nspec = \"alw_[0,1] (y1 > 0.5)\"").unwrap();
        assert_eq!(s.scenario.name, "corner");
        assert_eq!(s.scenario.input.dimension(), 1);
        assert_eq!(s.defaults, ScenarioDefaults::default());
    }

    #[test]
    fn full_file() {
        let text = r#"
name = "tight"
model = "at"
spec = "alw_[0,30] (rpm <= 2300) /\\ ev_[0,30] (gear >= 3)"
[params]
upshift_rpm = 1650.0
[inputs]
horizon = 20.0
sample_step = 0.5
[[inputs.variables]]
name = "throttle"
lower = 0.0
upper = 100.0
control_points = 4
[[inputs.variables]]
name = "brake"
lower = 0.0
upper = 325.0
control_points = 2
[defaults]
budget = 500
seeds = "1..3"
lambda = 8
"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.scenario.name, "tight");
        assert_eq!(s.scenario.input.dimension(), 6);
        assert_eq!(s.scenario.budget, 500);
        assert_eq!(s.defaults.lambda, Some(8));
    }

    #[test]
    fn rejects_bad_files() {
        let cases = [
            "model = \"at\"",
            "model = \"boat\"\nspec = \"ev_[0,1] (x > 0)\"",
            "model = \"corner\"\nspec = \"alw_[0,1] (nope > 0)\"",
            "model = \"corner\"\nspec = \"alw_[1,1] (y1 > 0)\"",
            "model = \"corner\"\nspec = \"alw_[0,1] (y1 > 0)\"\ncolour = 3",
            "model = \"at\"\nspec = \"alw_[0,1] (rpm > 0)\"\n[params]\nmass = -1.0",
            "model = \"corner\"\nspec = \"alw_[0,1] (y1 > 0)\"\n[defaults]\nseeds = \"9..1\"",
            "model = \"corner\"\nspec = \"alw_[0,1] (y1 > 0)\"\n[defaults]\ntimeout = 0.0",
        ];
        for text in cases {
            assert!(parse_scenario(text).is_err(), "{text}");
        }
    }

    #[test]
    fn resolves_builtin_and_missing() {
        assert_eq!(resolve_scenario("at1").unwrap().scenario.name, "at1");
        assert!(resolve_scenario("/nonexistent/scenario.toml").is_err());
    }
}
