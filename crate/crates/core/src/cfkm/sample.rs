use serde::{Deserialize, Serialize};

use super::{CfkmError, Result};

/// Sorted one-dimensional observations with their domain `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampleSet")]
pub struct SampleSet {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

#[derive(Deserialize)]
struct RawSampleSet {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl TryFrom<RawSampleSet> for SampleSet {
    type Error = CfkmError;

    fn try_from(raw: RawSampleSet) -> Result<Self> {
        SampleSet::new(raw.values, raw.lower, raw.upper)
    }
}

impl SampleSet {
    /// Sorts `values` and checks they are finite and inside `[lower, upper]`.
    pub fn new(mut values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(CfkmError::InvalidSample("no observations".into()));
        }
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(CfkmError::InvalidSample(format!(
                "bounds [{lower}, {upper}] must be finite with lower < upper"
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(CfkmError::InvalidSample(format!("non-finite observation {bad}")));
        }
        if let Some(&x) = values.iter().find(|&&v| v < lower || v > upper) {
            return Err(CfkmError::Domain { x, lower, upper });
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, lower, upper })
    }

    /// Uses the observed minimum and maximum as bounds.
    pub fn from_data(values: Vec<f64>) -> Result<Self> {
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(values, lower, upper)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}
