use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Distribution, ValidationReport};
use crate::{Error, Result};

/// Finite environment: transition `P(x'|x,u)`, observation `P(y|x)` and reward
/// `r(x,u)` tables, plus discount and horizon.
///
/// Tables are stored as nested vectors indexed `transition[u][x][x']`,
/// `observation[x][y]` and `reward[x][u]`, which is also the on-disk layout.
/// `initial` is the prior over `X_0`; when absent it is uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvModel {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub observation: Vec<Vec<f64>>,
    pub reward: Vec<Vec<f64>>,
    pub discount: f64,
    pub horizon: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl EnvModel {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    /// Row `P(·|x,u)`.
    #[inline]
    pub fn transition_row(&self, x: usize, u: usize) -> &[f64] {
        &self.transition[u][x]
    }

    /// Row `P(·|x)`.
    #[inline]
    pub fn observation_row(&self, x: usize) -> &[f64] {
        &self.observation[x]
    }

    #[inline]
    pub fn reward(&self, x: usize, u: usize) -> f64 {
        self.reward[x][u]
    }

    /// Reward column `r(·,u)` as a vector over states.
    pub fn reward_vector(&self, u: usize) -> Vec<f64> {
        (0..self.n_states()).map(|x| self.reward[x][u]).collect()
    }

    pub fn initial_distribution(&self) -> Distribution {
        match &self.initial {
            Some(p) => Distribution::new(p.clone()).expect("initial prior validated"),
            None => Distribution::uniform(self.n_states()),
        }
    }

    /// Largest absolute reward, `max(|r_min|, |r_max|)`.
    pub fn reward_magnitude(&self) -> f64 {
        self.r_min.abs().max(self.r_max.abs())
    }

    /// Every violated invariant, with its location. Empty iff the model is
    /// usable.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let (nx, nu, ny) = (self.n_states(), self.n_actions(), self.n_obs());
        if nx == 0 {
            report.push("states", "state set is empty");
        }
        if nu == 0 {
            report.push("actions", "action set is empty");
        }
        if ny == 0 {
            report.push("observations", "observation set is empty");
        }

        if let Some(init) = &self.initial {
            if init.len() != nx {
                report.push("initial", format!("length {} != {nx} states", init.len()));
            } else {
                report.check_row(|| "initial".into(), init);
            }
        }

        if self.transition.len() != nu {
            report.push(
                "transition",
                format!("{} action tables, expected {nu}", self.transition.len()),
            );
        }
        for (u, table) in self.transition.iter().enumerate() {
            if table.len() != nx {
                report.push(
                    format!("transition[{u}]"),
                    format!("{} rows, expected {nx}", table.len()),
                );
            }
            for (x, row) in table.iter().enumerate() {
                if row.len() != nx {
                    report.push(
                        format!("transition[{u}][{x}]"),
                        format!("length {}, expected {nx}", row.len()),
                    );
                    continue;
                }
                report.check_row(|| format!("transition[{u}][{x}]"), row);
            }
        }

        if self.observation.len() != nx {
            report.push(
                "observation",
                format!("{} rows, expected {nx}", self.observation.len()),
            );
        }
        for (x, row) in self.observation.iter().enumerate() {
            if row.len() != ny {
                report.push(
                    format!("observation[{x}]"),
                    format!("length {}, expected {ny}", row.len()),
                );
                continue;
            }
            report.check_row(|| format!("observation[{x}]"), row);
        }

        if !(self.r_min.is_finite() && self.r_max.is_finite()) || self.r_min > self.r_max {
            report.push(
                "r_min/r_max",
                format!("invalid reward bounds [{}, {}]", self.r_min, self.r_max),
            );
        }
        if self.reward.len() != nx {
            report.push("reward", format!("{} rows, expected {nx}", self.reward.len()));
        }
        for (x, row) in self.reward.iter().enumerate() {
            if row.len() != nu {
                report.push(
                    format!("reward[{x}]"),
                    format!("length {}, expected {nu}", row.len()),
                );
                continue;
            }
            for (u, &r) in row.iter().enumerate() {
                if !r.is_finite() || r < self.r_min || r > self.r_max {
                    report.push(
                        format!("reward[{x}][{u}]"),
                        format!("{r} outside [{}, {}]", self.r_min, self.r_max),
                    );
                }
            }
        }

        if !(self.discount > 0.0 && self.discount < 1.0) {
            report.push("discount", format!("{} not in (0, 1)", self.discount));
        }
        report
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Loads without validating; call [`EnvModel::validate`] before use.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub(crate) fn check_action(&self, u: usize) -> Result<()> {
        check_index("action", u, self.n_actions())
    }

    pub(crate) fn check_obs(&self, y: usize) -> Result<()> {
        check_index("observation", y, self.n_obs())
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, size })
    }
}
