use super::{Distribution, EnvModel};
use crate::human::HumanModel;
use crate::{Error, Result};

/// The human-AI POMDP: hidden state `(x, s)`, input `u_ai`, observation
/// `(y', u_h)` and reward `r(x, u_h)`.
///
/// The kernel is stored densely. For joint state `j = x·|S| + s` and input
/// `a`, the row `kernel_row(j, a)` is a distribution over outcomes indexed
/// `((x'·|S| + s')·|Y| + y')·|U| + u_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPomdp {
    n_x: usize,
    n_s: usize,
    n_u: usize,
    n_y: usize,
    kernel: Vec<f64>,
    reward: Vec<Vec<f64>>,
    policy: Vec<Vec<Vec<f64>>>,
    observation: Vec<Vec<f64>>,
    initial: Vec<f64>,
    discount: f64,
    r_min: f64,
    r_max: f64,
}

/// Builds the joint POMDP from an environment and a human model using
/// `P(x',s',y',u_h | x,s,u_ai) = P(u_h|s,u_ai)·P(s'|s,u_ai,y')·P(y'|x')·P(x'|x,u_h)`.
pub fn build_human_ai_pomdp(env: &EnvModel, human: &HumanModel) -> Result<JointPomdp> {
    env.validate().into_result()?;
    if human.n_actions() != env.n_actions() || human.n_obs() != env.n_obs() {
        return Err(Error::DimensionMismatch(format!(
            "human model has {} actions / {} observations, environment has {} / {}",
            human.n_actions(),
            human.n_obs(),
            env.n_actions(),
            env.n_obs()
        )));
    }
    human.validate(env.n_actions(), env.n_obs()).into_result()?;

    let (n_x, n_s, n_u, n_y) = (env.n_states(), human.n_internal(), env.n_actions(), env.n_obs());
    let width = n_x * n_s * n_y * n_u;
    let mut kernel = vec![0.0; n_x * n_s * n_u * width];
    for x in 0..n_x {
        for s in 0..n_s {
            for u_ai in 0..n_u {
                let base = ((x * n_s + s) * n_u + u_ai) * width;
                let row = &mut kernel[base..base + width];
                let policy = human.policy_row(s, u_ai);
                for (u_h, &p_h) in policy.iter().enumerate() {
                    if p_h == 0.0 {
                        continue;
                    }
                    let trans = env.transition_row(x, u_h);
                    for (x2, &p_x) in trans.iter().enumerate() {
                        if p_x == 0.0 {
                            continue;
                        }
                        for (y2, &p_y) in env.observation_row(x2).iter().enumerate() {
                            let dynamics = human.dynamics_row(s, u_ai, y2);
                            for (s2, &p_s) in dynamics.iter().enumerate() {
                                row[((x2 * n_s + s2) * n_y + y2) * n_u + u_h] =
                                    p_h * p_s * p_y * p_x;
                            }
                        }
                    }
                }
            }
        }
    }

    let initial = env
        .initial_distribution()
        .probs()
        .iter()
        .flat_map(|&px| human.initial.iter().map(move |&ps| px * ps))
        .collect();

    Ok(JointPomdp {
        n_x,
        n_s,
        n_u,
        n_y,
        kernel,
        reward: env.reward.clone(),
        policy: human.policy.clone(),
        observation: env.observation.clone(),
        initial,
        discount: env.discount,
        r_min: env.r_min,
        r_max: env.r_max,
    })
}

impl JointPomdp {
    pub fn n_system_states(&self) -> usize {
        self.n_x
    }

    pub fn n_internal(&self) -> usize {
        self.n_s
    }

    pub fn n_actions(&self) -> usize {
        self.n_u
    }

    pub fn n_obs(&self) -> usize {
        self.n_y
    }

    /// `|X|·|S|`.
    pub fn n_joint(&self) -> usize {
        self.n_x * self.n_s
    }

    /// Number of joint observations `(y', u_h)`.
    pub fn n_joint_obs(&self) -> usize {
        self.n_y * self.n_u
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward_bounds(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }

    #[inline]
    pub fn joint_index(&self, x: usize, s: usize) -> usize {
        x * self.n_s + s
    }

    #[inline]
    pub fn obs_index(&self, y: usize, u_h: usize) -> usize {
        y * self.n_u + u_h
    }

    /// Outcome distribution over `(x', s', y', u_h)` for joint state `j` and
    /// recommendation `u_ai`.
    #[inline]
    pub fn kernel_row(&self, j: usize, u_ai: usize) -> &[f64] {
        let width = self.n_joint() * self.n_joint_obs();
        let base = (j * self.n_u + u_ai) * width;
        &self.kernel[base..base + width]
    }

    #[allow(clippy::too_many_arguments)]
    pub fn prob(&self, x: usize, s: usize, u_ai: usize, x2: usize, s2: usize, y2: usize, u_h: usize) -> f64 {
        let row = self.kernel_row(self.joint_index(x, s), u_ai);
        row[(self.joint_index(x2, s2) * self.n_y + y2) * self.n_u + u_h]
    }

    /// `r(x, u_h)`.
    pub fn reward(&self, x: usize, u_h: usize) -> f64 {
        self.reward[x][u_h]
    }

    /// `P(u_h | s, u_ai)`.
    pub fn human_policy(&self, s: usize, u_ai: usize) -> &[f64] {
        &self.policy[s][u_ai]
    }

    /// Expected immediate reward `Σ_{u_h} P(u_h|s,u_ai)·r(x,u_h)` for every
    /// joint state.
    pub fn expected_reward_vector(&self, u_ai: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_joint()];
        for x in 0..self.n_x {
            for s in 0..self.n_s {
                out[self.joint_index(x, s)] = self.policy[s][u_ai]
                    .iter()
                    .enumerate()
                    .map(|(u_h, &p)| p * self.reward[x][u_h])
                    .sum();
            }
        }
        out
    }

    /// Prior over joint states `P(x_0)·P(s_0)`.
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// `P(y | x)`, used for the first observation `y_0`.
    pub fn observation_row(&self, x: usize) -> &[f64] {
        &self.observation[x]
    }

    /// Posterior over joint states after seeing `y_0`.
    pub fn initial_posterior(&self, y0: usize) -> Option<Distribution> {
        let w = (0..self.n_joint())
            .map(|j| self.initial[j] * self.observation[j / self.n_s][y0])
            .collect();
        Distribution::from_weights(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::machine::{machine_default, RewardVariant};
    use crate::human::{lazy_operator, HumanModel};
    use crate::rng;

    #[test]
    fn rows_sum_to_one() {
        let env = machine_default(RewardVariant::R1);
        let joint = build_human_ai_pomdp(&env, &lazy_operator(2)).unwrap();
        assert_eq!(joint.kernel_row(0, 0).len(), 3 * 2 * 2 * 4);
        for j in 0..joint.n_joint() {
            for u in 0..joint.n_actions() {
                let row = joint.kernel_row(j, u);
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12, "row ({j},{u}) sums to {sum}");
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn adherent_human_recovers_env_dynamics() {
        let env = machine_default(RewardVariant::R1);
        let joint = build_human_ai_pomdp(&env, &HumanModel::fully_adherent(4, 2)).unwrap();
        for x in 0..3 {
            for u in 0..4 {
                for x2 in 0..3 {
                    let mut p = 0.0;
                    for y2 in 0..2 {
                        for u_h in 0..4 {
                            p += joint.prob(x, 0, u, x2, 0, y2, u_h);
                        }
                    }
                    assert!((p - env.transition[u][x][x2]).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn zero_policy_entries_annihilate_outcomes() {
        let env = machine_default(RewardVariant::R1);
        let human = lazy_operator(2);
        let joint = build_human_ai_pomdp(&env, &human).unwrap();
        for s in 0..2 {
            for u_ai in 0..4 {
                for u_h in 0..4 {
                    if human.policy[s][u_ai][u_h] != 0.0 {
                        continue;
                    }
                    for x in 0..3 {
                        for x2 in 0..3 {
                            for s2 in 0..2 {
                                for y2 in 0..2 {
                                    assert_eq!(joint.prob(x, s, u_ai, x2, s2, y2, u_h), 0.0);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mismatched_action_sets_are_rejected() {
        let env = machine_default(RewardVariant::R1);
        let human = HumanModel::fully_adherent(3, 2);
        assert!(matches!(
            build_human_ai_pomdp(&env, &human),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rewards_within_bounds() {
        let env = machine_default(RewardVariant::R3);
        let joint = build_human_ai_pomdp(&env, &lazy_operator(2)).unwrap();
        let (lo, hi) = joint.reward_bounds();
        for x in 0..3 {
            for u in 0..4 {
                let r = joint.reward(x, u);
                assert!(lo <= r && r <= hi);
            }
        }
        for u in 0..4 {
            for r in joint.expected_reward_vector(u) {
                assert!(lo - 1e-12 <= r && r <= hi + 1e-12);
            }
        }
    }

    /// Simulates the generative model factor by factor and compares outcome
    /// frequencies with the kernel.
    #[test]
    fn monte_carlo_matches_kernel() {
        let env = machine_default(RewardVariant::R1);
        let human = lazy_operator(2);
        let joint = build_human_ai_pomdp(&env, &human).unwrap();
        let n = 100_000usize;
        for &(x, s, u_ai) in &[(1usize, 1usize, 0usize), (2, 1, 3), (0, 0, 1), (1, 1, 2)] {
            let mut r = rng::stream(1000 + (x * 8 + s * 4 + u_ai) as u64);
            let width = joint.n_joint() * joint.n_joint_obs();
            let mut counts = vec![0usize; width];
            for _ in 0..n {
                let u_h = human.sample_action(&mut r, s, u_ai);
                let x2 = crate::pomdp::sample_row(env.transition_row(x, u_h), &mut r);
                let y2 = crate::pomdp::sample_row(env.observation_row(x2), &mut r);
                let s2 = human.sample_internal(&mut r, s, u_ai, y2);
                counts[((x2 * 2 + s2) * 2 + y2) * 4 + u_h] += 1;
            }
            let row = joint.kernel_row(joint.joint_index(x, s), u_ai);
            for (k, &p) in row.iter().enumerate() {
                let freq = counts[k] as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                if p == 0.0 {
                    assert_eq!(counts[k], 0);
                } else {
                    assert!((freq - p).abs() <= 3.0 * se + 1e-12, "outcome {k}: freq {freq} vs p {p}");
                }
            }
        }
    }
}
