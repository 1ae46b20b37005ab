use std::io::Read;

use super::StlError;

/// Finite, uniformly sampled multi-variable signal. Sample `i` is at time `i * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    variables: Vec<String>,
    step: f64,
    values: Vec<Vec<f64>>,
}

impl Trace {
    /// `values[v]` is the sequence of variable `v`; all sequences must share one nonzero length.
    pub fn new(variables: Vec<String>, step: f64, values: Vec<Vec<f64>>) -> Result<Self, StlError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(StlError::InvalidTrace(format!("sample step must be positive, got {step}")));
        }
        if variables.len() != values.len() {
            return Err(StlError::InvalidTrace(format!(
                "{} variable names but {} value columns",
                variables.len(),
                values.len()
            )));
        }
        for (i, name) in variables.iter().enumerate() {
            if variables[..i].contains(name) {
                return Err(StlError::InvalidTrace(format!("duplicate variable `{name}`")));
            }
        }
        let len = values.first().map_or(0, Vec::len);
        if len == 0 {
            return Err(StlError::InvalidTrace("trace has no samples".into()));
        }
        if values.iter().any(|v| v.len() != len) {
            return Err(StlError::InvalidTrace("value sequences differ in length".into()));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(StlError::InvalidTrace("non-finite sample value".into()));
        }
        Ok(Trace {
            variables,
            step,
            values,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.step
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn values(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.values[i].as_slice())
    }

    pub(crate) fn column(&self, index: usize) -> &[f64] {
        &self.values[index]
    }

    /// The trace with the first `k` samples dropped (time re-based to 0).
    pub fn suffix(&self, k: usize) -> Option<Trace> {
        if k >= self.len() {
            return None;
        }
        Some(Trace {
            variables: self.variables.clone(),
            step: self.step,
            values: self.values.iter().map(|v| v[k..].to_vec()).collect(),
        })
    }

    /// Stacks the variables of two traces on the same grid.
    pub fn merge(&self, other: &Trace) -> Result<Trace, StlError> {
        if self.len() != other.len() || self.step != other.step {
            return Err(StlError::InvalidTrace("traces are on different time grids".into()));
        }
        let mut variables = self.variables.clone();
        variables.extend(other.variables.iter().cloned());
        let mut values = self.values.clone();
        values.extend(other.values.iter().cloned());
        Trace::new(variables, self.step, values)
    }

    /// Reads a CSV whose first column is `time` and remaining columns are variables.
    /// Times must start at 0 and be uniformly spaced (relative tolerance 1e-6).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Trace, StlError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| StlError::InvalidTrace(e.to_string()))?.clone();
        if headers.get(0) != Some("time") {
            return Err(StlError::InvalidTrace("first column must be `time`".into()));
        }
        if headers.len() < 2 {
            return Err(StlError::InvalidTrace("no variable columns".into()));
        }
        let variables: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut values = vec![Vec::new(); variables.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| StlError::InvalidTrace(e.to_string()))?;
            if record.len() != headers.len() {
                return Err(StlError::InvalidTrace(format!("row {} has {} fields", row + 1, record.len())));
            }
            let mut fields = record.iter().map(|s| {
                s.parse::<f64>()
                    .map_err(|_| StlError::InvalidTrace(format!("row {}: `{s}` is not a number", row + 1)))
            });
            times.push(fields.next().unwrap()?);
            for col in values.iter_mut() {
                col.push(fields.next().unwrap()?);
            }
        }
        let step = match times.as_slice() {
            [] => return Err(StlError::InvalidTrace("trace has no samples".into())),
            [t0] => {
                if *t0 != 0.0 {
                    return Err(StlError::InvalidTrace("time must start at 0".into()));
                }
                1.0
            }
            [t0, t1, ..] => {
                if *t0 != 0.0 {
                    return Err(StlError::InvalidTrace("time must start at 0".into()));
                }
                *t1 - *t0
            }
        };
        if !(step.is_finite() && step > 0.0) {
            return Err(StlError::InvalidTrace("time must be strictly increasing".into()));
        }
        for (i, t) in times.iter().enumerate() {
            let expected = i as f64 * step;
            if (t - expected).abs() > 1e-6 * step.max(expected.abs()) || t.is_nan() {
                return Err(StlError::InvalidTrace(format!("time column is not uniform at row {}", i + 1)));
            }
        }
        Trace::new(variables, step, values)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.time(i).to_string()];
            row.extend(self.values.iter().map(|v| v[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
