use crate::error::{Error, Result};

/// Time- or index-stamped sequence of states with column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Name of the stamp column, `t` for flows and `k` for discrete sequences.
    pub stamp: String,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl Trajectory {
    pub fn new(stamp: &str, labels: Vec<String>) -> Self {
        Trajectory {
            stamp: stamp.to_string(),
            times: Vec::new(),
            states: Vec::new(),
            labels,
        }
    }

    /// Labels `x1..xn`.
    pub fn generic_labels(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    pub fn push(&mut self, t: f64, state: Vec<f64>) -> Result<()> {
        if state.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                context: "Trajectory::push",
                expected: self.labels.len(),
                found: state.len(),
            });
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::InvalidArgument(format!(
                    "trajectory stamps must increase ({t} after {last})"
                )));
            }
        }
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.times.last().map(|&t| (t, self.states.last().unwrap().as_slice()))
    }

    /// Values of column `j` over the whole trajectory.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[j]).collect()
    }

    pub fn relabel(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                context: "Trajectory::relabel",
                expected: self.labels.len(),
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }
}
