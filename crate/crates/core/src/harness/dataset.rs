use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ahm::{adherence_init, adherence_step, AdherenceState, Sample};
use crate::human::HumanModel;
use crate::pomdp::{sample_row, EnvModel};
use crate::rng::{self, streams};
use crate::{Error, Result};

use super::episode::{discounted_sum, StepRecord, Trajectory};

/// Trajectories collected under uniformly random recommendations, each step
/// tagged with the adherence state in force when the recommendation was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_obs: usize,
    pub n_actions: usize,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn n_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps.len()).sum()
    }

    /// Training examples `(ŝ_t, u_ai_t, u_h_t)` for every step.
    pub fn samples(&self) -> Vec<Sample> {
        self.trajectories
            .iter()
            .flat_map(|t| t.steps.iter())
            .map(|s| Sample {
                state: AdherenceState::from_index(s.approx_state.expect("dataset steps carry ŝ")),
                u_ai: s.u_ai,
                u_h: s.u_h,
            })
            .collect()
    }
}

/// Exploratory dataset of `n` trajectories with decisions at `t = 0..=T`.
/// Trajectory `i` is generated from its own stream, so the dataset does not
/// depend on thread count.
pub fn generate_dataset(env: &EnvModel, human: &HumanModel, n: usize, horizon: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    human.validate(env.n_actions(), env.n_obs()).into_result()?;
    let nu = env.n_actions();
    let trajectories = (0..n)
        .into_par_iter()
        .map(|i| {
            let traj_seed = rng::derive_seed(seed, streams::DATASET, i as u64);
            let mut r = rng::stream(traj_seed);
            let mut x = env.initial_distribution().sample(&mut r);
            let mut s = human.initial_distribution().sample(&mut r);
            let mut y = sample_row(env.observation_row(x), &mut r);
            let mut a_state = adherence_init(y);
            let mut steps = Vec::with_capacity(horizon + 1);
            for t in 0..=horizon {
                let u_ai = r.gen_range(0..nu);
                let u_h = human.sample_action(&mut r, s, u_ai);
                let reward = env.reward(x, u_h);
                steps.push(StepRecord {
                    t,
                    x,
                    s: Some(s),
                    y,
                    u_ai,
                    u_h,
                    reward,
                    approx_state: Some(a_state.index()),
                });
                if t == horizon {
                    break;
                }
                x = sample_row(env.transition_row(x, u_h), &mut r);
                y = sample_row(env.observation_row(x), &mut r);
                s = human.sample_internal(&mut r, s, u_ai, y);
                a_state = adherence_step(a_state, u_ai, u_h, y);
            }
            Trajectory {
                seed: traj_seed,
                discount: env.discount,
                discounted_return: discounted_sum(env.discount, steps.iter().map(|s| s.reward)),
                steps,
            }
        })
        .collect();
    Ok(Dataset {
        n_obs: env.n_obs(),
        n_actions: nu,
        trajectories,
    })
}
