//! Systems under test: an input trace goes in, an output trace on the same
//! grid comes out.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{InputSpec, InputVariable};
use crate::stl::{parse_formula, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("input alphabet mismatch: {0}")]
    Alphabet(String),
    #[error("simulation failed: {0}")]
    SimulationFailure(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

pub trait SystemModel: Send + Sync + Debug {
    fn name(&self) -> &str;

    /// Input variables with their bounds and default parameterization.
    fn input_spec(&self) -> InputSpec;

    fn outputs(&self) -> Vec<String>;

    /// Deterministic; the output shares the input's time grid.
    fn simulate(&self, input: &Trace) -> Result<Trace, ModelError>;
}

/// Input columns in the order of `spec`, clamped to their bounds.
fn input_columns(spec: &InputSpec, input: &Trace) -> Result<Vec<Vec<f64>>, ModelError> {
    if input.variables().len() != spec.variables.len() {
        return Err(ModelError::Alphabet(format!(
            "expected inputs {:?}, got {:?}",
            spec.names(),
            input.variables()
        )));
    }
    spec.variables
        .iter()
        .map(|v| {
            let col = input
                .values(&v.name)
                .ok_or_else(|| ModelError::Alphabet(format!("missing input `{}`", v.name)))?;
            Ok(col.iter().map(|x| x.clamp(v.lower, v.upper)).collect())
        })
        .collect()
}

fn output_trace(names: &[&str], step: f64, values: Vec<Vec<f64>>) -> Result<Trace, ModelError> {
    Trace::new(names.iter().map(|s| s.to_string()).collect(), step, values)
        .map_err(|e| ModelError::SimulationFailure(e.to_string()))
}

fn input_var(name: &str, lower: f64, upper: f64, control_points: usize) -> InputVariable {
    InputVariable {
        name: name.into(),
        lower,
        upper,
        control_points,
    }
}

// ---------------------------------------------------------------------------
// Automatic transmission surrogate

/// Parameters of the transmission surrogate. Speed is in mph, engine speed in rpm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtParams {
    pub mass: f64,
    /// Drive force at full throttle in first gear.
    pub torque_gain: f64,
    /// Fraction of `torque_gain` delivered in each gear.
    pub gear_torque: [f64; 4],
    pub drag: f64,
    pub brake_gain: f64,
    /// Engine rpm per mph in each gear.
    pub ratios: [f64; 4],
    pub idle_rpm: f64,
    /// Up-shift when rpm exceeds `upshift_rpm + upshift_per_throttle * throttle`.
    pub upshift_rpm: f64,
    pub upshift_per_throttle: f64,
    /// Down-shift when rpm falls below this.
    pub downshift_rpm: f64,
    pub max_rpm: f64,
    /// Internal Euler step in seconds.
    pub dt: f64,
}

impl Default for AtParams {
    fn default() -> Self {
        AtParams {
            mass: 1500.0,
            torque_gain: 12_000.0,
            gear_torque: [1.0, 0.62, 0.42, 0.30],
            drag: 0.25,
            brake_gain: 60.0,
            ratios: [110.0, 65.0, 45.0, 33.0],
            idle_rpm: 600.0,
            upshift_rpm: 1600.0,
            upshift_per_throttle: 28.0,
            downshift_rpm: 1000.0,
            max_rpm: 6000.0,
            dt: 0.01,
        }
    }
}

impl AtParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.into()));
        let positive = [self.mass, self.torque_gain, self.dt, self.max_rpm];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("mass, torque_gain, dt and max_rpm must be positive");
        }
        let nonneg = [self.drag, self.brake_gain, self.idle_rpm, self.upshift_per_throttle];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("drag, brake_gain, idle_rpm and upshift_per_throttle must be nonnegative");
        }
        if self.ratios.iter().chain(&self.gear_torque).any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("gear ratios and torque fractions must be positive");
        }
        if !(self.upshift_rpm > self.downshift_rpm && self.downshift_rpm >= 0.0) {
            return bad("up-shift threshold must exceed the down-shift threshold");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtState {
    pub speed: f64,
    pub rpm: f64,
    /// 1 to 4.
    pub gear: u8,
}

impl AtState {
    pub fn rest(params: &AtParams) -> Self {
        AtState {
            speed: 0.0,
            rpm: params.idle_rpm.min(params.max_rpm),
            gear: 1,
        }
    }
}

fn engine_rpm(params: &AtParams, gear: u8, speed: f64) -> f64 {
    (params.ratios[gear as usize - 1] * speed + params.idle_rpm).clamp(0.0, params.max_rpm)
}

/// One explicit Euler step followed by at most one gear change.
pub fn at_surrogate_step(params: &AtParams, state: AtState, throttle: f64, brake: f64, dt: f64) -> AtState {
    let throttle = throttle.clamp(0.0, 100.0);
    let brake = brake.clamp(0.0, 325.0);
    let g = state.gear as usize - 1;
    let drive = params.torque_gain * params.gear_torque[g] * throttle / 100.0;
    let resist = params.drag * state.speed * state.speed + params.brake_gain * brake;
    let speed = (state.speed + dt * (drive - resist) / params.mass).max(0.0);
    let rpm = engine_rpm(params, state.gear, speed);
    let up = params.upshift_rpm + params.upshift_per_throttle * throttle;
    let gear = if rpm > up && state.gear < 4 {
        state.gear + 1
    } else if rpm < params.downshift_rpm && state.gear > 1 {
        state.gear - 1
    } else {
        state.gear
    };
    AtState {
        speed,
        rpm: engine_rpm(params, gear, speed),
        gear,
    }
}

/// Vehicle with a four-speed automatic gearbox. Inputs `throttle` in
/// [0, 100] and `brake` in [0, 325]; outputs `gear`, `rpm`, `speed`.
#[derive(Debug, Clone, Default)]
pub struct AtSurrogate {
    pub params: AtParams,
}

impl AtSurrogate {
    pub fn new(params: AtParams) -> Result<Self, ModelError> {
        params.validate()?;
        Ok(AtSurrogate { params })
    }

    /// Integrates with internal step at most `dt`, holding each input
    /// sample until the next one.
    pub fn simulate_with_step(&self, input: &Trace, dt: f64) -> Result<Trace, ModelError> {
        let cols = input_columns(&self.input_spec(), input)?;
        let (throttle, brake) = (&cols[0], &cols[1]);
        let substeps = (input.step() / dt - 1e-9).ceil().max(1.0) as usize;
        let h = input.step() / substeps as f64;
        let mut state = AtState::rest(&self.params);
        let n = input.len();
        let (mut gear, mut rpm, mut speed) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            if i > 0 {
                for _ in 0..substeps {
                    state = at_surrogate_step(&self.params, state, throttle[i - 1], brake[i - 1], h);
                }
                if !state.speed.is_finite() {
                    return Err(ModelError::SimulationFailure(format!("non-finite speed at sample {i}")));
                }
            }
            gear.push(state.gear as f64);
            rpm.push(state.rpm);
            speed.push(state.speed);
        }
        output_trace(&["gear", "rpm", "speed"], input.step(), vec![gear, rpm, speed])
    }
}

impl SystemModel for AtSurrogate {
    fn name(&self) -> &str {
        "at"
    }

    fn input_spec(&self) -> InputSpec {
        InputSpec {
            variables: vec![input_var("throttle", 0.0, 100.0, 5), input_var("brake", 0.0, 325.0, 5)],
            horizon: 30.0,
            sample_step: 0.1,
        }
    }

    fn outputs(&self) -> Vec<String> {
        vec!["gear".into(), "rpm".into(), "speed".into()]
    }

    fn simulate(&self, input: &Trace) -> Result<Trace, ModelError> {
        self.simulate_with_step(input, self.params.dt)
    }
}

// ---------------------------------------------------------------------------
// Closed-form problems

/// `y1 = u`, `y2 = 1 - u` for `u` in [0, 1]. Both positive exactly when `0 < u < 1`.
#[derive(Debug, Clone, Default)]
pub struct Corner;

impl SystemModel for Corner {
    fn name(&self) -> &str {
        "corner"
    }

    fn input_spec(&self) -> InputSpec {
        InputSpec {
            variables: vec![input_var("u", 0.0, 1.0, 1)],
            horizon: 1.0,
            sample_step: 0.1,
        }
    }

    fn outputs(&self) -> Vec<String> {
        vec!["y1".into(), "y2".into()]
    }

    fn simulate(&self, input: &Trace) -> Result<Trace, ModelError> {
        let u = input_columns(&self.input_spec(), input)?.remove(0);
        let y2 = u.iter().map(|v| 1.0 - v).collect();
        output_trace(&["y1", "y2"], input.step(), vec![u, y2])
    }
}

/// `y = u` for `u` in [-1, 2].
#[derive(Debug, Clone, Default)]
pub struct Identity;

impl SystemModel for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn input_spec(&self) -> InputSpec {
        InputSpec {
            variables: vec![input_var("u", -1.0, 2.0, 2)],
            horizon: 1.0,
            sample_step: 0.1,
        }
    }

    fn outputs(&self) -> Vec<String> {
        vec!["y".into()]
    }

    fn simulate(&self, input: &Trace) -> Result<Trace, ModelError> {
        let u = input_columns(&self.input_spec(), input)?.remove(0);
        output_trace(&["y"], input.step(), vec![u])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConflictParams {
    /// Multiplier of `cost`.
    pub scale: f64,
    /// Width of one `level` band of `a * b`.
    pub band: f64,
}

impl Default for ConflictParams {
    fn default() -> Self {
        ConflictParams {
            scale: 1000.0,
            band: 0.1,
        }
    }
}

/// Inputs `a`, `b` in [0, 1]. Outputs `cost = scale * (a + b)` and the
/// integer `level = floor(a * b / band)`.
///
/// With the packaged requirement `cost < 920` and `level > 1.5` the feasible
/// set is `a + b < 0.92, a * b >= 0.2`, a thin lens around `a = b = 0.46`.
#[derive(Debug, Clone, Default)]
pub struct Conflict {
    pub params: ConflictParams,
}

impl SystemModel for Conflict {
    fn name(&self) -> &str {
        "conflict"
    }

    fn input_spec(&self) -> InputSpec {
        InputSpec {
            variables: vec![input_var("a", 0.0, 1.0, 1), input_var("b", 0.0, 1.0, 1)],
            horizon: 1.0,
            sample_step: 0.1,
        }
    }

    fn outputs(&self) -> Vec<String> {
        vec!["cost".into(), "level".into()]
    }

    fn simulate(&self, input: &Trace) -> Result<Trace, ModelError> {
        let cols = input_columns(&self.input_spec(), input)?;
        let (a, b) = (&cols[0], &cols[1]);
        let cost = a.iter().zip(b).map(|(a, b)| self.params.scale * (a + b)).collect();
        let level = a.iter().zip(b).map(|(a, b)| (a * b / self.params.band).floor()).collect();
        output_trace(&["cost", "level"], input.step(), vec![cost, level])
    }
}

/// Builds a model by name, applying parameter overrides.
pub fn build_model(name: &str, params: Option<&toml::Table>) -> Result<Arc<dyn SystemModel>, ModelError> {
    fn decode<T: serde::de::DeserializeOwned + Default>(params: Option<&toml::Table>) -> Result<T, ModelError> {
        match params {
            None => Ok(T::default()),
            Some(t) => toml::Value::Table(t.clone())
                .try_into()
                .map_err(|e: toml::de::Error| ModelError::InvalidParams(e.message().to_string())),
        }
    }
    let no_params = |model: &str| match params {
        Some(t) if !t.is_empty() => Err(ModelError::InvalidParams(format!("model `{model}` takes no parameters"))),
        _ => Ok(()),
    };
    Ok(match name {
        "at" => Arc::new(AtSurrogate::new(decode(params)?)?),
        "corner" => {
            no_params(name)?;
            Arc::new(Corner)
        }
        "identity" => {
            no_params(name)?;
            Arc::new(Identity)
        }
        "conflict" => {
            let p: ConflictParams = decode(params)?;
            if !(p.scale > 0.0 && p.band > 0.0 && p.scale.is_finite() && p.band.is_finite()) {
                return Err(ModelError::InvalidParams("scale and band must be positive".into()));
            }
            Arc::new(Conflict { params: p })
        }
        other => return Err(ModelError::UnknownModel(other.to_string())),
    })
}

pub const MODEL_NAMES: [&str; 4] = ["at", "corner", "identity", "conflict"];

// ---------------------------------------------------------------------------
// Scenario catalog

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub model: Arc<dyn SystemModel>,
    pub spec: String,
    pub input: InputSpec,
    /// Default simulation budget per trial.
    pub budget: usize,
}

pub fn at1_spec(p: f64) -> String {
    format!("alw_[0,30] (rpm <= {p}) /\\ alw_[0,30] (speed <= 60) /\\ ev_[0,30] (gear >= 3)")
}

pub fn at3_spec(speed: f64, rpm: f64) -> String {
    format!("ev_[0,10] (speed >= {speed}) /\\ alw_[0,30] (rpm <= {rpm})")
}

pub const AT2_SPEC: &str = "ev_[0,29] (speed >= 100) /\\ alw_[29,30] (speed <= 65)";
pub const CORNER_SPEC: &str = "alw_[0,1] (y1 > 0) /\\ alw_[0,1] (y2 > 0)";
pub const CONTRADICTION_SPEC: &str = "alw_[0,1] (y > 1) /\\ alw_[0,1] (y < 0)";
pub const CONFLICT_SPEC: &str = "alw_[0,1] (cost < 920) /\\ ev_[0,1] (level > 1.5)";

pub fn builtin_scenarios() -> Vec<Scenario> {
    let at: Arc<dyn SystemModel> = Arc::new(AtSurrogate::default());
    let scenario = |name: &str, description: &str, model: &Arc<dyn SystemModel>, spec: String, budget: usize| Scenario {
        name: name.into(),
        description: description.into(),
        model: model.clone(),
        input: model.input_spec(),
        spec,
        budget,
    };
    let mut out = Vec::new();
    for (name, p) in [("at1", 2400.0), ("at1-2500", 2500.0), ("at1-2300", 2300.0)] {
        out.push(scenario(
            name,
            &format!("reach gear 4 with rpm <= {p} and speed <= 60"),
            &at,
            at1_spec(p),
            3000,
        ));
    }
    out.push(scenario(
        "at2",
        "exceed 100 mph, then be below 65 mph at the end",
        &at,
        AT2_SPEC.into(),
        3000,
    ));
    out.push(scenario(
        "at3",
        "reach 80 mph within 10 s with rpm <= 4500",
        &at,
        at3_spec(80.0, 4500.0),
        3000,
    ));
    out.push(scenario(
        "at3-50-2700",
        "reach 50 mph within 10 s with rpm <= 2700",
        &at,
        at3_spec(50.0, 2700.0),
        3000,
    ));
    out.push(scenario(
        "analytic-corner",
        "y1 = u and y2 = 1 - u both positive",
        &(Arc::new(Corner) as Arc<dyn SystemModel>),
        CORNER_SPEC.into(),
        200,
    ));
    out.push(scenario(
        "analytic-contradiction",
        "y > 1 and y < 0 at once (unsatisfiable)",
        &(Arc::new(Identity) as Arc<dyn SystemModel>),
        CONTRADICTION_SPEC.into(),
        500,
    ));
    out.push(scenario(
        "analytic-conflict",
        "cost in the thousands against an integer level",
        &(Arc::new(Conflict::default()) as Arc<dyn SystemModel>),
        CONFLICT_SPEC.into(),
        1000,
    ));
    out
}

pub fn find_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

/// Checks that `spec` parses and only mentions inputs and outputs of `model`.
pub fn check_spec(model: &dyn SystemModel, input: &InputSpec, spec: &str) -> Result<(), String> {
    let formula = parse_formula(spec).map_err(|e| e.to_string())?;
    let outputs = model.outputs();
    for v in formula.variables() {
        if !outputs.contains(&v) && !input.variables.iter().any(|i| i.name == v) {
            return Err(format!("unknown signal `{v}` for model `{}`", model.name()));
        }
    }
    Ok(())
}

/// A note when the spec looks past the input horizon. Such windows are
/// clipped, so the affected operators become vacuous near the end.
pub fn horizon_warning(input: &InputSpec, spec: &str) -> Option<String> {
    let reach = parse_formula(spec).ok()?.time_reach();
    (reach > input.horizon + crate::stl::INTERVAL_EPS).then(|| {
        format!("spec looks {reach} s ahead but the input horizon is {} s", input.horizon)
    })
}
