use std::fmt;

use serde::Serialize;

use super::NORMALIZATION_TOL;

/// One violated invariant, with a human-readable location such as
/// `transition[2][1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

/// Diagnostics from model validation. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn check_row(&mut self, location: impl FnOnce() -> String, row: &[f64]) {
        if let Some(msg) = check_row(row) {
            self.push(location(), msg);
        }
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(crate::Error::InvalidModel(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.location, v.message)?;
        }
        Ok(())
    }
}

/// Checks that `row` is a probability vector. Returns a description of the
/// first problem found.
pub fn check_row(row: &[f64]) -> Option<String> {
    if let Some((i, p)) = row.iter().enumerate().find(|(_, p)| !p.is_finite()) {
        return Some(format!("entry {i} is not finite ({p})"));
    }
    if let Some((i, p)) = row.iter().enumerate().find(|(_, &p)| p < 0.0) {
        return Some(format!("entry {i} is negative ({p})"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Some(format!("row sums to {sum}, expected 1"));
    }
    None
}
