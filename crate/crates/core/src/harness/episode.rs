use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::human::HumanModel;
use crate::pomdp::{sample_row, EnvModel};
use crate::rng::{self, streams};
use crate::solver::Agent;
use crate::Result;

/// One decision step. `s` is absent when no human is in the loop; `ŝ` is
/// present when the agent tracks an approximate human state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub x: usize,
    pub s: Option<usize>,
    pub y: usize,
    pub u_ai: usize,
    pub u_h: usize,
    pub reward: f64,
    pub approx_state: Option<usize>,
}

/// Realized episode with decisions at `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub discount: f64,
    pub steps: Vec<StepRecord>,
    pub discounted_return: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// `Σ_t γ^t r_t` from the stored records.
    pub fn recompute_return(&self) -> f64 {
        discounted_sum(self.discount, self.steps.iter().map(|s| s.reward))
    }
}

pub(crate) fn discounted_sum(discount: f64, rewards: impl Iterator<Item = f64>) -> f64 {
    rewards.enumerate().map(|(t, r)| discount.powi(t as i32) * r).sum()
}

/// Closed loop: observe, recommend, the human (or, without one, the
/// recommendation itself) acts, the machine moves.
///
/// All randomness comes from `seed`, split into an environment stream and a
/// human stream that each consume a fixed number of draws per step. Episodes
/// with the same seed therefore share their random numbers across agents and
/// scenarios, which makes paired comparisons between scenarios much sharper.
pub fn simulate_episode<A: Agent>(
    env: &EnvModel,
    human: Option<&HumanModel>,
    agent: &A,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut r_env = rng::child_stream(seed, streams::ENV, 0);
    let mut r_h = rng::child_stream(seed, streams::HUMAN, 0);
    let mut agent = agent.clone();
    let mut x = env.initial_distribution().sample(&mut r_env);
    let mut s = human.map(|h| h.initial_distribution().sample(&mut r_h));
    let mut y = sample_row(env.observation_row(x), &mut r_env);
    agent.reset(y)?;
    let mut steps = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let u_ai = agent.recommend(t)?;
        let u_h = match (human, s) {
            (Some(h), Some(si)) => h.sample_action(&mut r_h, si, u_ai),
            _ => u_ai,
        };
        steps.push(StepRecord {
            t,
            x,
            s,
            y,
            u_ai,
            u_h,
            reward: env.reward(x, u_h),
            approx_state: agent.approx_state(),
        });
        if t == horizon {
            break;
        }
        x = sample_row(env.transition_row(x, u_h), &mut r_env);
        y = sample_row(env.observation_row(x), &mut r_env);
        if let (Some(h), Some(si)) = (human, s) {
            s = Some(h.sample_internal(&mut r_h, si, u_ai, y));
        }
        agent.observe(u_ai, u_h, y)?;
    }
    let discounted_return = discounted_sum(env.discount, steps.iter().map(|s| s.reward));
    Ok(Trajectory {
        seed,
        discount: env.discount,
        steps,
        discounted_return,
    })
}

/// Runs `n` episodes in parallel; episode `i` uses the seed derived from
/// `(master_seed, i)`, and results come back in episode order.
pub fn run_episodes<A: Agent>(
    env: &EnvModel,
    human: Option<&HumanModel>,
    agent: &A,
    horizon: usize,
    n: usize,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let seed = rng::derive_seed(master_seed, streams::EPISODES, i as u64);
            simulate_episode(env, human, agent, horizon, seed)
        })
        .collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    /// Mean and `s/√n` with the unbiased sample variance; the error is 0 for
    /// fewer than two values.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                stderr: 0.0,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

impl McEstimate {
    /// Estimate of `E[a − b]` from paired samples `a_i − b_i`.
    pub fn paired_difference(a: &[f64], b: &[f64]) -> Option<Self> {
        if a.len() != b.len() {
            return None;
        }
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Some(Self::from_values(&d))
    }

    /// `mean − z·stderr`, the one-sided lower confidence limit.
    pub fn lower_bound(&self, z: f64) -> f64 {
        self.mean - z * self.stderr
    }
}

/// One-sided 95% normal quantile.
pub const Z_95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Monte Carlo estimate of an agent's expected discounted return.
pub fn evaluate_agent_mc<A: Agent>(
    env: &EnvModel,
    human: Option<&HumanModel>,
    agent: &A,
    horizon: usize,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    let returns: Vec<f64> = run_episodes(env, human, agent, horizon, n, seed)?
        .into_iter()
        .map(|t| t.discounted_return)
        .collect();
    Ok(McEstimate::from_values(&returns))
}
