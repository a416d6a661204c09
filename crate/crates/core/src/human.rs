//! Ground-truth human behaviour: an internal state `S_t` with stochastic
//! dynamics `P(s'|s,u_ai,y')` and an action policy `P(u_h|s,u_ai)`.
//!
//! Deterministic control laws are the special case of point-mass rows.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pomdp::{Distribution, ValidationReport};
use crate::Result;

/// Human model tables, indexed `policy[s][u_ai][u_h]` and
/// `dynamics[s][u_ai][y'][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanModel {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub internal_states: Vec<String>,
    pub initial: Vec<f64>,
    pub policy: Vec<Vec<Vec<f64>>>,
    pub dynamics: Vec<Vec<Vec<Vec<f64>>>>,
}

impl HumanModel {
    pub fn n_internal(&self) -> usize {
        self.initial.len()
    }

    pub fn n_actions(&self) -> usize {
        self.policy.first().map_or(0, |rows| rows.len())
    }

    pub fn n_obs(&self) -> usize {
        self.dynamics
            .first()
            .and_then(|t| t.first())
            .map_or(0, |rows| rows.len())
    }

    pub fn initial_distribution(&self) -> Distribution {
        Distribution::new(self.initial.clone()).expect("initial internal prior validated")
    }

    /// Row `P(·|s,u_ai)` without bounds checks beyond slice indexing.
    #[inline]
    pub fn policy_row(&self, s: usize, u_ai: usize) -> &[f64] {
        &self.policy[s][u_ai]
    }

    /// Row `P(·|s,u_ai,y')`.
    #[inline]
    pub fn dynamics_row(&self, s: usize, u_ai: usize, y_next: usize) -> &[f64] {
        &self.dynamics[s][u_ai][y_next]
    }

    /// Validates every row and checks the tables against the declared action
    /// and observation set sizes.
    pub fn validate(&self, n_actions: usize, n_obs: usize) -> ValidationReport {
        let mut report = ValidationReport::default();
        let ns = self.n_internal();
        if ns == 0 {
            report.push("initial", "internal state set is empty");
        } else {
            report.check_row(|| "initial".into(), &self.initial);
        }
        if !self.internal_states.is_empty() && self.internal_states.len() != ns {
            report.push(
                "internal_states",
                format!("{} labels for {ns} internal states", self.internal_states.len()),
            );
        }
        if self.policy.len() != ns {
            report.push("policy", format!("{} tables, expected {ns}", self.policy.len()));
        }
        for (s, table) in self.policy.iter().enumerate() {
            if table.len() != n_actions {
                report.push(
                    format!("policy[{s}]"),
                    format!("{} rows, expected {n_actions}", table.len()),
                );
            }
            for (u, row) in table.iter().enumerate() {
                if row.len() != n_actions {
                    report.push(
                        format!("policy[{s}][{u}]"),
                        format!("length {}, expected {n_actions}", row.len()),
                    );
                    continue;
                }
                report.check_row(|| format!("policy[{s}][{u}]"), row);
            }
        }
        if self.dynamics.len() != ns {
            report.push("dynamics", format!("{} tables, expected {ns}", self.dynamics.len()));
        }
        for (s, per_action) in self.dynamics.iter().enumerate() {
            if per_action.len() != n_actions {
                report.push(
                    format!("dynamics[{s}]"),
                    format!("{} action tables, expected {n_actions}", per_action.len()),
                );
            }
            for (u, per_obs) in per_action.iter().enumerate() {
                if per_obs.len() != n_obs {
                    report.push(
                        format!("dynamics[{s}][{u}]"),
                        format!("{} observation rows, expected {n_obs}", per_obs.len()),
                    );
                }
                for (y, row) in per_obs.iter().enumerate() {
                    if row.len() != ns {
                        report.push(
                            format!("dynamics[{s}][{u}][{y}]"),
                            format!("length {}, expected {ns}", row.len()),
                        );
                        continue;
                    }
                    report.check_row(|| format!("dynamics[{s}][{u}][{y}]"), row);
                }
            }
        }
        report
    }

    /// Validates against the model's own action/observation dimensions.
    pub fn validate_self(&self) -> ValidationReport {
        self.validate(self.n_actions(), self.n_obs())
    }

    fn check(&self, s: usize, u_ai: usize) -> Result<()> {
        crate::pomdp::check_index_pub("internal state", s, self.n_internal())?;
        crate::pomdp::check_index_pub("action", u_ai, self.n_actions())
    }

    /// `P(u_h | s, u_ai)` as a distribution over actions.
    pub fn action_dist(&self, s: usize, u_ai: usize) -> Result<Distribution> {
        self.check(s, u_ai)?;
        Distribution::new(self.policy[s][u_ai].clone())
    }

    /// `P(s' | s, u_ai, y')` as a distribution over internal states.
    pub fn internal_step_dist(&self, s: usize, u_ai: usize, y_next: usize) -> Result<Distribution> {
        self.check(s, u_ai)?;
        crate::pomdp::check_index_pub("observation", y_next, self.n_obs())?;
        Distribution::new(self.dynamics[s][u_ai][y_next].clone())
    }

    /// Draws an implemented action. The draw consumes exactly one variate.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R, s: usize, u_ai: usize) -> usize {
        crate::pomdp::sample_row(&self.policy[s][u_ai], rng)
    }

    pub fn sample_internal<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        s: usize,
        u_ai: usize,
        y_next: usize,
    ) -> usize {
        crate::pomdp::sample_row(&self.dynamics[s][u_ai][y_next], rng)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// Human that implements every recommendation exactly, with one internal
    /// state.
    pub fn fully_adherent(n_actions: usize, n_obs: usize) -> Self {
        let policy = vec![(0..n_actions)
            .map(|u| Distribution::point(n_actions, u).into_vec())
            .collect()];
        let dynamics = vec![vec![vec![vec![1.0]; n_obs]; n_actions]];
        Self {
            internal_states: vec!["only".into()],
            initial: vec![1.0],
            policy,
            dynamics,
        }
    }
}

/// Labels of the lazy operator's internal states.
pub const UNMOTIVATED: usize = 0;
pub const MOTIVATED: usize = 1;

/// Probability that a motivated operator follows a recommended produce,
/// inspect or major repair.
pub const LAZY_FOLLOW_PROB: f64 = 0.97;
/// Probability of each other action in that case.
pub const LAZY_DEVIATE_PROB: f64 = 0.01;
/// Probability that an unmotivated operator produces regardless.
pub const LAZY_UNMOTIVATED_PRODUCE_PROB: f64 = 0.99;
/// Probability that an unmotivated operator follows a recommendation other
/// than produce.
pub const LAZY_UNMOTIVATED_FOLLOW_PROB: f64 = 0.01;

/// The lazy machine operator with internal state `{0: unmotivated,
/// 1: motivated}` over actions `{0: produce, 1: inspect, 2: small repair,
/// 3: major repair}`.
///
/// - motivated, recommendation in {0,1,3}: follows w.p. 0.97, every other
///   action w.p. 0.01;
/// - motivated, recommendation 2: produces;
/// - motivated, recommendation 3: becomes unmotivated next step;
/// - unmotivated: produces w.p. 0.99, follows w.p. 0.01;
/// - unmotivated: motivated again after one step;
/// - otherwise motivation persists.
///
/// Starts motivated.
pub fn lazy_operator(n_obs: usize) -> HumanModel {
    lazy_operator_with_initial(n_obs, vec![0.0, 1.0])
}

pub fn lazy_operator_with_initial(n_obs: usize, initial: Vec<f64>) -> HumanModel {
    const N_ACTIONS: usize = 4;
    const SMALL_REPAIR: usize = 2;
    const MAJOR_REPAIR: usize = 3;
    const PRODUCE: usize = 0;

    let mut policy = vec![vec![vec![0.0; N_ACTIONS]; N_ACTIONS]; 2];
    for u_ai in 0..N_ACTIONS {
        // unmotivated
        let row = &mut policy[UNMOTIVATED][u_ai];
        row[PRODUCE] += LAZY_UNMOTIVATED_PRODUCE_PROB;
        row[u_ai] += LAZY_UNMOTIVATED_FOLLOW_PROB;

        // motivated
        let row = &mut policy[MOTIVATED][u_ai];
        if u_ai == SMALL_REPAIR {
            row[PRODUCE] = 1.0;
        } else {
            for (u_h, p) in row.iter_mut().enumerate() {
                *p = if u_h == u_ai { LAZY_FOLLOW_PROB } else { LAZY_DEVIATE_PROB };
            }
        }
    }

    let mut dynamics = vec![vec![vec![vec![0.0; 2]; n_obs]; N_ACTIONS]; 2];
    for u_ai in 0..N_ACTIONS {
        for y in 0..n_obs {
            dynamics[UNMOTIVATED][u_ai][y][MOTIVATED] = 1.0;
            let next = if u_ai == MAJOR_REPAIR { UNMOTIVATED } else { MOTIVATED };
            dynamics[MOTIVATED][u_ai][y][next] = 1.0;
        }
    }

    HumanModel {
        internal_states: vec!["unmotivated".into(), "motivated".into()],
        initial,
        policy,
        dynamics,
    }
}
