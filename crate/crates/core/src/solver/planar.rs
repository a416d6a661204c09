//! Planning over `Ŝ × Δ(X)`: the approximate state is observed, so alpha
//! vectors live on `X` only and one set is kept per `(t, ŝ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ahm::{adherence_step, AdherenceState, Ahm};
use crate::pomdp::EnvModel;
use crate::{Error, Result};

use super::alpha::{dedupe, prune_dominated, AlphaVector, Policy, SolverKind, TIE_TOL};

/// How stage backups over `Δ(X)` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BackupMode {
    /// Full cross-sum backups. Fails with [`Error::VectorSetExplosion`] once a
    /// cross-sum would exceed `max_vectors`.
    Exact { max_vectors: usize, prune: bool },
    /// Point-based backups at every point of the regular grid on `Δ(X)` with
    /// the given number of subdivisions per axis.
    Grid { resolution: usize },
}

impl Default for BackupMode {
    fn default() -> Self {
        BackupMode::Grid { resolution: 30 }
    }
}

/// Observed-state model used by the planner: `μ(u_h | ŝ, u_ai)` and the
/// deterministic successor `ŝ' = f(ŝ, u_ai, u_h, y')`.
#[derive(Debug, Clone)]
pub struct ObservedModel {
    pub n_states: usize,
    n_actions: usize,
    n_obs: usize,
    /// `mu[ŝ·|U| + u_ai][u_h]`.
    mu: Vec<Vec<f64>>,
    /// `next[((ŝ·|U| + u_ai)·|U| + u_h)·|Y| + y']`.
    next: Vec<usize>,
}

impl ObservedModel {
    pub fn from_ahm(ahm: &Ahm) -> Self {
        let (nu, ny) = (ahm.n_actions, ahm.n_obs);
        let n = ahm.n_states();
        let mu = ahm.prediction_table().into_iter().map(|d| d.into_vec()).collect();
        let mut next = Vec::with_capacity(n * nu * nu * ny);
        for s in 0..n {
            let state = AdherenceState::from_index(s);
            for a in 0..nu {
                for u_h in 0..nu {
                    for y in 0..ny {
                        next.push(adherence_step(state, a, u_h, y).index());
                    }
                }
            }
        }
        Self {
            n_states: n,
            n_actions: nu,
            n_obs: ny,
            mu,
            next,
        }
    }

    /// Every recommendation is implemented.
    pub fn adherent(n_actions: usize, n_obs: usize) -> Self {
        let mu = (0..n_actions)
            .map(|a| (0..n_actions).map(|u| if u == a { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            n_states: 1,
            n_actions,
            n_obs,
            mu,
            next: vec![0; n_actions * n_actions * n_obs],
        }
    }

    pub fn mu(&self, s: usize, a: usize) -> &[f64] {
        &self.mu[s * self.n_actions + a]
    }

    pub fn next(&self, s: usize, a: usize, u_h: usize, y: usize) -> usize {
        self.next[((s * self.n_actions + a) * self.n_actions + u_h) * self.n_obs + y]
    }
}

/// Approximate DP over `(ŝ, b_x)` with the AHM's predictor.
pub fn solve_ahm(env: &EnvModel, ahm: &Ahm, horizon: usize, mode: BackupMode) -> Result<Policy> {
    if ahm.n_actions != env.n_actions() || ahm.n_obs != env.n_obs() {
        return Err(Error::DimensionMismatch(format!(
            "AHM over {} actions / {} observations, environment has {} / {}",
            ahm.n_actions,
            ahm.n_obs,
            env.n_actions(),
            env.n_obs()
        )));
    }
    solve_observed(env, &ObservedModel::from_ahm(ahm), horizon, mode, SolverKind::Ahm)
}

/// Standard POMDP over `Δ(X)` assuming full adherence.
pub fn solve_naive(env: &EnvModel, horizon: usize, mode: BackupMode) -> Result<Policy> {
    let model = ObservedModel::adherent(env.n_actions(), env.n_obs());
    solve_observed(env, &model, horizon, mode, SolverKind::Naive)
}

/// Every point `k/resolution` of the simplex in `dim` dimensions, in
/// lexicographic order of the numerators.
pub fn simplex_grid(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(dim, left - k, prefix, out);
            prefix.pop();
        }
    }
    if dim == 0 {
        return Vec::new();
    }
    let res = resolution.max(1);
    let mut raw = Vec::new();
    rec(dim, res, &mut Vec::with_capacity(dim), &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / res as f64).collect())
        .collect()
}

pub fn solve_observed(
    env: &EnvModel,
    model: &ObservedModel,
    horizon: usize,
    mode: BackupMode,
    kind: SolverKind,
) -> Result<Policy> {
    env.validate().into_result()?;
    let (nx, nu, ny) = (env.n_states(), env.n_actions(), env.n_obs());
    let gamma = env.discount;

    // projection[u_h][y'][x][x'] = P(x'|x,u_h)·P(y'|x')
    let projection: Vec<Vec<Vec<Vec<f64>>>> = (0..nu)
        .map(|u| {
            (0..ny)
                .map(|y| {
                    (0..nx)
                        .map(|x| {
                            env.transition_row(x, u)
                                .iter()
                                .enumerate()
                                .map(|(x2, &p)| p * env.observation_row(x2)[y])
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let base = |s: usize, a: usize| -> Vec<f64> {
        let mu = model.mu(s, a);
        (0..nx)
            .map(|x| (0..nu).map(|u| mu[u] * env.reward(x, u)).sum())
            .collect()
    };
    let grid = match mode {
        BackupMode::Grid { resolution } => Some(simplex_grid(nx, resolution)),
        BackupMode::Exact { .. } => None,
    };
    let prune = matches!(mode, BackupMode::Exact { prune: true, .. });

    let mut stages: Vec<Vec<Vec<AlphaVector>>> = vec![Vec::new(); horizon + 1];
    stages[horizon] = (0..model.n_states)
        .map(|s| {
            let set: Vec<AlphaVector> = (0..nu)
                .map(|a| AlphaVector {
                    values: base(s, a),
                    action: a,
                    stage: horizon,
                })
                .collect();
            if prune {
                prune_dominated(set)
            } else {
                set
            }
        })
        .collect();

    for t in (0..horizon).rev() {
        let next_sets = &stages[t + 1];
        // projected[ŝ'][u_h][y'] = {Σ_x' P(x'|·,u_h)P(y'|x')α(x') : α ∈ V_{t+1}(ŝ')}
        let projected: Vec<Vec<Vec<Vec<Vec<f64>>>>> = next_sets
            .par_iter()
            .map(|set| {
                (0..nu)
                    .map(|u| {
                        (0..ny)
                            .map(|y| set.iter().map(|v| mat_vec(&projection[u][y], &v.values)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let stage: Vec<Vec<AlphaVector>> = (0..model.n_states)
            .into_par_iter()
            .map(|s| {
                let branches = |a: usize| -> Vec<(f64, &[Vec<f64>])> {
                    let mu = model.mu(s, a);
                    let mut out = Vec::new();
                    for u in 0..nu {
                        if mu[u] == 0.0 {
                            continue;
                        }
                        for y in 0..ny {
                            out.push((gamma * mu[u], projected[model.next(s, a, u, y)][u][y].as_slice()));
                        }
                    }
                    out
                };
                match (&grid, mode) {
                    (Some(points), _) => Ok(point_backup(points, nu, t, &base_all(s, nu, &base), branches)),
                    (None, BackupMode::Exact { max_vectors, prune }) => {
                        exact_backup(nu, t, &base_all(s, nu, &base), branches, max_vectors, prune)
                    }
                    _ => unreachable!("grid points exist exactly in grid mode"),
                }
            })
            .collect::<Result<_>>()?;
        stages[t] = stage;
    }

    Ok(Policy {
        kind,
        horizon,
        discount: gamma,
        hidden_dim: nx,
        n_approx_states: model.n_states,
        belief_points: grid.as_ref().map(Vec::len),
        stages,
    })
}

fn base_all(s: usize, nu: usize, base: &impl Fn(usize, usize) -> Vec<f64>) -> Vec<Vec<f64>> {
    (0..nu).map(|a| base(s, a)).collect()
}

pub(crate) fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One point-based backup per belief point: for each recommendation, pick the
/// best projected successor vector per branch, then keep the recommendation
/// with the highest value at the point.
pub(crate) fn point_backup<'a>(
    points: &[Vec<f64>],
    n_actions: usize,
    stage: usize,
    base: &[Vec<f64>],
    branches: impl Fn(usize) -> Vec<(f64, &'a [Vec<f64>])>,
) -> Vec<AlphaVector> {
    let per_action: Vec<Vec<(f64, &[Vec<f64>])>> = (0..n_actions).map(&branches).collect();
    let mut out = Vec::with_capacity(points.len());
    for b in points {
        let mut best: Option<(f64, AlphaVector)> = None;
        for (a, branch) in per_action.iter().enumerate() {
            let mut values = base[a].clone();
            for &(weight, set) in branch {
                let mut pick = &set[0];
                let mut pick_v = dot(pick, b);
                for g in &set[1..] {
                    let v = dot(g, b);
                    if v > pick_v {
                        pick = g;
                        pick_v = v;
                    }
                }
                for (o, g) in values.iter_mut().zip(pick) {
                    *o += weight * g;
                }
            }
            let value = dot(&values, b);
            if best.as_ref().is_none_or(|(v, _)| value > v + TIE_TOL) {
                best = Some((
                    value,
                    AlphaVector {
                        values,
                        action: a,
                        stage,
                    },
                ));
            }
        }
        out.push(best.expect("at least one action").1);
    }
    dedupe(out)
}

/// Exact backup by incremental cross-sums.
pub(crate) fn exact_backup<'a>(
    n_actions: usize,
    stage: usize,
    base: &[Vec<f64>],
    branches: impl Fn(usize) -> Vec<(f64, &'a [Vec<f64>])>,
    max_vectors: usize,
    prune: bool,
) -> Result<Vec<AlphaVector>> {
    let mut all = Vec::new();
    for a in 0..n_actions {
        let mut acc: Vec<Vec<f64>> = vec![base[a].clone()];
        for (weight, set) in branches(a) {
            let size = acc.len() * set.len();
            if size > max_vectors {
                return Err(Error::VectorSetExplosion {
                    size,
                    cap: max_vectors,
                    stage,
                });
            }
            let mut next = Vec::with_capacity(size);
            for v in &acc {
                for g in set {
                    next.push(v.iter().zip(g).map(|(x, y)| x + weight * y).collect::<Vec<f64>>());
                }
            }
            acc = if prune { prune_values(next) } else { next };
        }
        all.extend(acc.into_iter().map(|values| AlphaVector {
            values,
            action: a,
            stage,
        }));
    }
    let all = if prune { prune_dominated(all) } else { all };
    if all.len() > max_vectors {
        return Err(Error::VectorSetExplosion {
            size: all.len(),
            cap: max_vectors,
            stage,
        });
    }
    Ok(all)
}

/// Pairwise dominance pruning of bare vectors; equal vectors keep the first.
fn prune_values(set: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let tagged = set
        .into_iter()
        .map(|values| AlphaVector {
            values,
            action: 0,
            stage: 0,
        })
        .collect();
    prune_dominated(tagged).into_iter().map(|v| v.values).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::machine::{machine_default, RewardVariant};

    #[test]
    fn grid_has_binomial_size_and_sums_to_one() {
        let g = simplex_grid(3, 4);
        assert_eq!(g.len(), 15);
        for p in &g {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(g[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn naive_horizon_zero_is_myopic() {
        let env = machine_default(RewardVariant::R1);
        let mode = BackupMode::Exact {
            max_vectors: 1000,
            prune: true,
        };
        let p = solve_naive(&env, 0, mode).unwrap();
        for b in simplex_grid(3, 10) {
            let q: Vec<f64> = (0..4).map(|u| (0..3).map(|x| b[x] * env.reward(x, u)).sum()).collect();
            let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let a = p.greedy_action(0, 0, &b).unwrap();
            assert!((q[a] - best).abs() < 1e-12);
        }
    }

    #[test]
    fn explosion_guard_reports_stage() {
        let env = machine_default(RewardVariant::R1);
        let mode = BackupMode::Exact {
            max_vectors: 3,
            prune: false,
        };
        let err = solve_naive(&env, 2, mode).unwrap_err();
        assert!(matches!(err, Error::VectorSetExplosion { cap: 3, .. }));
    }
}
