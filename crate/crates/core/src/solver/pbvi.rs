//! Point-based value iteration over product beliefs `b_x ⊗ b_s`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{initial_info_state, info_state_step, product_belief, FilterMode, InfoState};
use crate::human::HumanModel;
use crate::pomdp::{build_human_ai_pomdp, sample_row, EnvModel};
use crate::rng::{self, streams};
use crate::Result;

use super::alpha::{AlphaVector, Policy, SolverKind};
use super::planar::{mat_vec, point_backup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PbviConfig {
    /// Target size of the belief set. Corners and the exhaustively expanded
    /// beliefs are always kept, even past this target.
    pub n_belief_points: usize,
    /// Seed of the sampled belief rollouts. Experiments replace it with their
    /// master seed.
    pub expansion_seed: u64,
    /// Every reachable belief up to this depth is included.
    pub exhaustive_depth: usize,
}

impl Default for PbviConfig {
    fn default() -> Self {
        Self {
            n_belief_points: 500,
            expansion_seed: 0,
            exhaustive_depth: 1,
        }
    }
}

/// Rollouts that add nothing new before sampled expansion gives up.
const STALL_LIMIT: usize = 1000;

/// Belief set for the exact solver, as product vectors indexed `x·|S| + s`.
///
/// Order: simplex corners, beliefs reachable within `exhaustive_depth` steps
/// of every initial information state (breadth first), then beliefs visited
/// by Bayes-filter rollouts under uniformly random recommendations. Sampled
/// points are appended in a fixed order, so a larger target extends a smaller
/// one.
pub fn expand_beliefs(env: &EnvModel, human: &HumanModel, horizon: usize, config: &PbviConfig) -> Result<Vec<Vec<f64>>> {
    let (nx, ns, nu, ny) = (env.n_states(), human.n_internal(), env.n_actions(), env.n_obs());
    let n = nx * ns;
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    let mut add = |p: Vec<f64>, points: &mut Vec<Vec<f64>>| -> bool {
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            points.push(p);
            true
        } else {
            false
        }
    };
    for j in 0..n {
        let mut corner = vec![0.0; n];
        corner[j] = 1.0;
        add(corner, &mut points);
    }

    let mut frontier: Vec<InfoState> = Vec::new();
    for y0 in 0..ny {
        if let Ok(pi) = initial_info_state(env, human, y0) {
            add(pi.product(), &mut points);
            frontier.push(pi);
        }
    }
    for _ in 0..config.exhaustive_depth.min(horizon) {
        let mut next_frontier = Vec::new();
        for pi in &frontier {
            for a in 0..nu {
                for u_h in 0..nu {
                    for y in 0..ny {
                        if let Ok(next) = info_state_step(pi, a, u_h, y, env, human, FilterMode::Bayes) {
                            if add(next.product(), &mut points) {
                                next_frontier.push(next);
                            }
                        }
                    }
                }
            }
        }
        frontier = next_frontier;
    }

    let mut stalled = 0;
    let mut k = 0u64;
    while points.len() < config.n_belief_points && stalled < STALL_LIMIT && horizon > 0 {
        let mut r = rng::child_stream(config.expansion_seed, streams::BELIEF_EXPANSION, k);
        k += 1;
        let mut x = env.initial_distribution().sample(&mut r);
        let mut s = human.initial_distribution().sample(&mut r);
        let y0 = sample_row(env.observation_row(x), &mut r);
        let mut pi = initial_info_state(env, human, y0)?;
        let mut grew = false;
        for _ in 0..horizon {
            let a = rand::Rng::gen_range(&mut r, 0..nu);
            let u_h = human.sample_action(&mut r, s, a);
            x = sample_row(env.transition_row(x, u_h), &mut r);
            let y = sample_row(env.observation_row(x), &mut r);
            s = human.sample_internal(&mut r, s, a, y);
            pi = info_state_step(&pi, a, u_h, y, env, human, FilterMode::Bayes)?;
            if points.len() < config.n_belief_points && add(product_belief(&pi.b_x, &pi.b_s), &mut points) {
                grew = true;
            }
        }
        stalled = if grew { 0 } else { stalled + 1 };
    }
    Ok(points)
}

/// Finite-horizon PBVI on the information state `(b_s, b_x)` with the true
/// human model. Vectors live on `X×S`; the value at an information state is
/// read off at its product belief.
pub fn solve_exact_info_state(env: &EnvModel, human: &HumanModel, horizon: usize, config: &PbviConfig) -> Result<Policy> {
    let points = expand_beliefs(env, human, horizon, config)?;
    solve_on_points(env, human, horizon, &points)
}

/// PBVI backups on a caller-supplied belief set.
pub fn solve_on_points(env: &EnvModel, human: &HumanModel, horizon: usize, points: &[Vec<f64>]) -> Result<Policy> {
    let joint = build_human_ai_pomdp(env, human)?;
    let (n, nu, ny) = (joint.n_joint(), joint.n_actions(), joint.n_obs());
    let gamma = joint.discount();
    let base: Vec<Vec<f64>> = (0..nu).map(|a| joint.expected_reward_vector(a)).collect();
    // projection[a][y'][u_h][j][j'] = P(j', y', u_h | j, a)
    let projection: Vec<Vec<Vec<Vec<Vec<f64>>>>> = (0..nu)
        .map(|a| {
            (0..ny)
                .map(|y| {
                    (0..nu)
                        .map(|u| {
                            (0..n)
                                .map(|j| {
                                    let row = joint.kernel_row(j, a);
                                    (0..n).map(|j2| row[(j2 * ny + y) * nu + u]).collect()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut stages: Vec<Vec<Vec<AlphaVector>>> = vec![Vec::new(); horizon + 1];
    stages[horizon] = vec![(0..nu)
        .map(|a| AlphaVector {
            values: base[a].clone(),
            action: a,
            stage: horizon,
        })
        .collect()];
    for t in (0..horizon).rev() {
        let next = &stages[t + 1][0];
        let projected: Vec<Vec<Vec<Vec<Vec<f64>>>>> = projection
            .par_iter()
            .map(|per_y| {
                per_y
                    .iter()
                    .map(|per_u| per_u.iter().map(|m| next.iter().map(|v| mat_vec(m, &v.values)).collect()).collect())
                    .collect()
            })
            .collect();
        let branches = |a: usize| -> Vec<(f64, &[Vec<f64>])> {
            let mut out = Vec::with_capacity(ny * nu);
            for y in 0..ny {
                for u in 0..nu {
                    out.push((gamma, projected[a][y][u].as_slice()));
                }
            }
            out
        };
        let chunk = points.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
        let mut set: Vec<AlphaVector> = points
            .par_chunks(chunk)
            .map(|ps| point_backup(ps, nu, t, &base, branches))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        set = super::alpha::dedupe(set);
        stages[t] = vec![set];
    }
    Ok(Policy {
        kind: SolverKind::ExactInfoState,
        horizon,
        discount: gamma,
        hidden_dim: n,
        n_approx_states: 1,
        belief_points: Some(points.len()),
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::machine::{machine_default, RewardVariant};
    use crate::human::lazy_operator;

    #[test]
    fn expansion_is_deterministic_and_nested() {
        let env = machine_default(RewardVariant::R1);
        let human = lazy_operator(2);
        let small = PbviConfig {
            n_belief_points: 80,
            expansion_seed: 9,
            exhaustive_depth: 0,
        };
        let large = PbviConfig {
            n_belief_points: 160,
            ..small
        };
        let a = expand_beliefs(&env, &human, 5, &small).unwrap();
        let b = expand_beliefs(&env, &human, 5, &large).unwrap();
        assert_eq!(a, expand_beliefs(&env, &human, 5, &small).unwrap());
        assert_eq!(a.len(), 80);
        assert_eq!(&b[..a.len()], &a[..]);
    }

    #[test]
    fn points_are_distributions() {
        let env = machine_default(RewardVariant::R2);
        let human = lazy_operator(2);
        for p in expand_beliefs(&env, &human, 3, &PbviConfig::default()).unwrap() {
            assert_eq!(p.len(), 6);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
