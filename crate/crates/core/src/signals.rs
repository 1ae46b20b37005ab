//! Piecewise-constant input signals generated from flat decision vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::Trace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid input specification: {0}")]
    InvalidSpec(String),
    #[error("decision vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coordinate {index} = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputVariable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub control_points: usize,
}

/// Shape of the input search space: one piecewise-constant signal per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub variables: Vec<InputVariable>,
    pub horizon: f64,
    pub sample_step: f64,
}

/// A point of the search space, laid out variable-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector(pub Vec<f64>);

impl DecisionVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl InputSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |m: String| Err(SignalError::InvalidSpec(m));
        if self.variables.is_empty() {
            return bad("no input variables".into());
        }
        for v in &self.variables {
            if !(v.lower.is_finite() && v.upper.is_finite() && v.lower < v.upper) {
                return bad(format!("variable `{}` needs finite lower < upper", v.name));
            }
            if v.control_points == 0 {
                return bad(format!("variable `{}` needs at least one control point", v.name));
            }
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].iter().any(|w| w.name == v.name) {
                return bad(format!("duplicate variable `{}`", v.name));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon must be positive".into());
        }
        if !(self.sample_step.is_finite() && self.sample_step > 0.0) {
            return bad("sample step must be positive".into());
        }
        let ratio = self.horizon / self.sample_step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad("horizon must be a multiple of the sample step".into());
        }
        if ratio.round() > 1e7 {
            return bad("too many samples".into());
        }
        Ok(())
    }

    /// Length of a decision vector: total number of control points.
    pub fn dimension(&self) -> usize {
        self.variables.iter().map(|v| v.control_points).sum()
    }

    /// Number of sampling intervals across the horizon.
    pub fn intervals(&self) -> usize {
        (self.horizon / self.sample_step).round() as usize
    }

    /// Per-coordinate `(lower, upper)` bounds in decision-vector order.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.variables
            .iter()
            .flat_map(|v| std::iter::repeat_n((v.lower, v.upper), v.control_points))
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Builds the input trace for `x`. The horizon is cut into `m` equal
    /// segments per variable; segment `k` holds coordinate `k` and is right-open,
    /// except the last one, which is closed.
    pub fn gen_signal(&self, x: &DecisionVector) -> Result<Trace, SignalError> {
        let expected = self.dimension();
        if x.0.len() != expected {
            return Err(SignalError::LengthMismatch {
                expected,
                got: x.0.len(),
            });
        }
        for (index, (&value, (lower, upper))) in x.0.iter().zip(self.bounds()).enumerate() {
            if !(value >= lower && value <= upper) {
                return Err(SignalError::OutOfBounds {
                    index,
                    value,
                    lower,
                    upper,
                });
            }
        }
        let n = self.intervals();
        let mut values = Vec::with_capacity(self.variables.len());
        let mut offset = 0;
        for v in &self.variables {
            let m = v.control_points;
            let coords = &x.0[offset..offset + m];
            // sample i sits at i/n of the horizon, i.e. in segment floor(i*m/n)
            values.push((0..=n).map(|i| coords[(i * m / n.max(1)).min(m - 1)]).collect());
            offset += m;
        }
        Trace::new(self.names(), self.sample_step, values)
            .map_err(|e| SignalError::InvalidSpec(e.to_string()))
    }
}

/// Free-function form of [`InputSpec::gen_signal`].
pub fn gen_signal(spec: &InputSpec, x: &DecisionVector) -> Result<Trace, SignalError> {
    spec.gen_signal(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, lower: f64, upper: f64, m: usize) -> InputVariable {
        InputVariable {
            name: name.into(),
            lower,
            upper,
            control_points: m,
        }
    }

    #[test]
    fn three_segments() {
        let spec = InputSpec {
            variables: vec![var("u", 0.0, 10.0, 3)],
            horizon: 30.0,
            sample_step: 1.0,
        };
        let t = spec.gen_signal(&DecisionVector(vec![1.0, 2.0, 3.0])).unwrap();
        let u = t.values("u").unwrap();
        assert_eq!(u.len(), 31);
        for (i, &v) in u.iter().enumerate() {
            let expected = if i < 10 {
                1.0
            } else if i < 20 {
                2.0
            } else {
                3.0
            };
            assert_eq!(v, expected, "sample {i}");
        }
    }

    #[test]
    fn variable_major_layout() {
        let spec = InputSpec {
            variables: vec![var("a", 0.0, 10.0, 2), var("b", 0.0, 10.0, 2)],
            horizon: 4.0,
            sample_step: 1.0,
        };
        let t = spec.gen_signal(&DecisionVector(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(t.values("a").unwrap(), &[1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(t.values("b").unwrap(), &[3.0, 3.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn dimensions() {
        let at = InputSpec {
            variables: vec![var("throttle", 0.0, 100.0, 5), var("brake", 0.0, 325.0, 5)],
            horizon: 30.0,
            sample_step: 0.1,
        };
        assert_eq!(at.dimension(), 10);
        let wt = InputSpec {
            variables: vec![var("v", 8.0, 16.0, 18)],
            horizon: 90.0,
            sample_step: 0.5,
        };
        assert_eq!(wt.dimension(), 18);
        let one = InputSpec {
            variables: vec![var("u", 0.0, 1.0, 1)],
            horizon: 1.0,
            sample_step: 0.1,
        };
        assert_eq!(one.dimension(), 1);
    }

    #[test]
    fn errors() {
        let spec = InputSpec {
            variables: vec![var("u", 0.0, 1.0, 2)],
            horizon: 1.0,
            sample_step: 0.1,
        };
        assert!(matches!(
            spec.gen_signal(&DecisionVector(vec![0.5])),
            Err(SignalError::LengthMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            spec.gen_signal(&DecisionVector(vec![0.5, 1.5])),
            Err(SignalError::OutOfBounds { index: 1, .. })
        ));
        let mut bad = spec.clone();
        bad.sample_step = 0.3;
        assert!(bad.validate().is_err());
        let mut bad = spec.clone();
        bad.variables[0].upper = 0.0;
        assert!(bad.validate().is_err());
        assert!(spec.validate().is_ok());
    }
}
