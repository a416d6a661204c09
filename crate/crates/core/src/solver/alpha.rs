use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Values within this distance count as tied; ties go to the lowest action.
pub const TIE_TOL: f64 = 1e-12;

/// Linear functional over hidden states supporting one recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    pub action: usize,
    pub stage: usize,
}

impl AlphaVector {
    #[inline]
    pub fn value(&self, belief: &[f64]) -> f64 {
        self.values.iter().zip(belief).map(|(a, b)| a * b).sum()
    }

    /// Componentwise `self ≥ other`.
    pub fn dominates(&self, other: &AlphaVector) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a >= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Point-based DP over `Δ(S)×Δ(X)` with the true human model.
    ExactInfoState,
    /// DP over `Ŝ×Δ(X)` with an approximate human model.
    Ahm,
    /// DP over `Δ(X)` assuming every recommendation is implemented.
    Naive,
}

/// Per-stage alpha-vector sets, one set per approximate state.
///
/// Stages run `0..=horizon`. Hidden states are `X×S` (indexed `x·|S| + s`) for
/// the exact solver and `X` otherwise; `n_approx_states` is 1 except for the
/// AHM solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: SolverKind,
    pub horizon: usize,
    pub discount: f64,
    pub hidden_dim: usize,
    pub n_approx_states: usize,
    /// Belief points used by point-based backups, if any.
    pub belief_points: Option<usize>,
    /// `stages[t][ŝ]`.
    pub stages: Vec<Vec<Vec<AlphaVector>>>,
}

impl Policy {
    fn set(&self, t: usize, approx_state: usize) -> Result<&[AlphaVector]> {
        let stage = self.stages.get(t).ok_or(Error::StageOutOfRange {
            stage: t,
            horizon: self.horizon,
        })?;
        let set = stage.get(approx_state).ok_or(Error::IndexOutOfRange {
            what: "approximate state",
            index: approx_state,
            size: stage.len(),
        })?;
        if set.is_empty() {
            return Err(Error::Domain(format!("empty vector set at stage {t}")));
        }
        Ok(set)
    }

    /// Maximizing vector at `belief`; ties broken by lowest action.
    pub fn best_vector(&self, t: usize, approx_state: usize, belief: &[f64]) -> Result<&AlphaVector> {
        let set = self.set(t, approx_state)?;
        if belief.len() != self.hidden_dim {
            return Err(Error::DimensionMismatch(format!(
                "belief of size {} for hidden dimension {}",
                belief.len(),
                self.hidden_dim
            )));
        }
        Ok(best_in(set, belief).0)
    }

    pub fn greedy_action(&self, t: usize, approx_state: usize, belief: &[f64]) -> Result<usize> {
        Ok(self.best_vector(t, approx_state, belief)?.action)
    }

    pub fn value(&self, t: usize, approx_state: usize, belief: &[f64]) -> Result<f64> {
        let v = self.best_vector(t, approx_state, belief)?;
        Ok(v.value(belief))
    }

    pub fn n_vectors(&self) -> usize {
        self.stages.iter().flatten().map(Vec::len).sum()
    }

    /// Policy for a shorter horizon: the last `horizon + 1` stages, renumbered
    /// from 0. Valid because the model is time-invariant.
    pub fn tail(&self, horizon: usize) -> Result<Policy> {
        if horizon > self.horizon {
            return Err(Error::StageOutOfRange {
                stage: horizon,
                horizon: self.horizon,
            });
        }
        let offset = self.horizon - horizon;
        let stages = self.stages[offset..]
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|set| {
                        set.iter()
                            .map(|v| AlphaVector {
                                stage: v.stage - offset,
                                ..v.clone()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Policy {
            horizon,
            stages,
            ..self.clone()
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// Best vector and its value; ties within [`TIE_TOL`] go to the lower action.
pub(crate) fn best_in<'a>(set: &'a [AlphaVector], belief: &[f64]) -> (&'a AlphaVector, f64) {
    let mut best = &set[0];
    let mut best_v = best.value(belief);
    for v in &set[1..] {
        let val = v.value(belief);
        if val > best_v + TIE_TOL || ((val - best_v).abs() <= TIE_TOL && v.action < best.action) {
            best = v;
            best_v = val;
        }
    }
    (best, best_v)
}

/// Removes vectors that another vector dominates componentwise. Of two equal
/// vectors the one with the lower action survives.
pub fn prune_dominated(set: Vec<AlphaVector>) -> Vec<AlphaVector> {
    let n = set.len();
    let mut keep = vec![true; n];
    for i in 0..n {
        if !keep[i] {
            continue;
        }
        for j in 0..n {
            if i == j || !keep[j] {
                continue;
            }
            if set[j].dominates(&set[i]) {
                let equal = set[i].dominates(&set[j]);
                if !equal || set[j].action < set[i].action || (set[j].action == set[i].action && j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }
    }
    set.into_iter().zip(keep).filter_map(|(v, k)| k.then_some(v)).collect()
}

/// Drops exact duplicates (same values and action), keeping first occurrence.
pub(crate) fn dedupe(set: Vec<AlphaVector>) -> Vec<AlphaVector> {
    let mut seen = std::collections::HashSet::new();
    set.into_iter()
        .filter(|v| {
            let key: Vec<u64> = v.values.iter().map(|x| x.to_bits()).chain([v.action as u64]).collect();
            seen.insert(key)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn av(values: &[f64], action: usize) -> AlphaVector {
        AlphaVector {
            values: values.to_vec(),
            action,
            stage: 0,
        }
    }

    fn policy(set: Vec<AlphaVector>) -> Policy {
        Policy {
            kind: SolverKind::Naive,
            horizon: 0,
            discount: 0.95,
            hidden_dim: set[0].values.len(),
            n_approx_states: 1,
            belief_points: None,
            stages: vec![vec![set]],
        }
    }

    #[test]
    fn single_vector_always_wins() {
        let p = policy(vec![av(&[1.0, -2.0, 0.5], 3)]);
        for b in [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5], [0.0, 0.0, 1.0]] {
            assert_eq!(p.greedy_action(0, 0, &b).unwrap(), 3);
        }
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let p = policy(vec![av(&[1.0, 0.0], 2), av(&[0.0, 1.0], 1)]);
        assert_eq!(p.greedy_action(0, 0, &[0.5, 0.5]).unwrap(), 1);
        let p = policy(vec![av(&[1.0, 1.0], 3), av(&[1.0, 1.0], 0)]);
        assert_eq!(p.greedy_action(0, 0, &[0.3, 0.7]).unwrap(), 0);
    }

    #[test]
    fn stage_out_of_range() {
        let p = policy(vec![av(&[1.0], 0)]);
        assert!(matches!(p.greedy_action(1, 0, &[1.0]), Err(Error::StageOutOfRange { .. })));
    }

    #[test]
    fn pruning_keeps_envelope() {
        let set = vec![
            av(&[1.0, 0.0], 0),
            av(&[0.0, 1.0], 1),
            av(&[0.4, 0.4], 2),
            av(&[0.6, 0.6], 3),
            av(&[0.6, 0.6], 2),
        ];
        let pruned = prune_dominated(set);
        let actions: Vec<_> = pruned.iter().map(|v| v.action).collect();
        assert_eq!(actions, vec![0, 1, 2]);
        assert_eq!(pruned[2].values, vec![0.6, 0.6]);
    }

    #[test]
    fn policy_round_trip_is_bit_exact() {
        let p = policy(vec![av(&[0.1 + 0.2, 1.0 / 3.0], 1), av(&[2.0f64.sqrt(), -0.0], 0)]);
        let text = p.to_json_string().unwrap();
        let back = Policy::from_json_str(&text).unwrap();
        assert_eq!(text, back.to_json_string().unwrap());
        for (a, b) in p.stages[0][0].iter().zip(&back.stages[0][0]) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
