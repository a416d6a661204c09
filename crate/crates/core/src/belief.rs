//! Filtering over the system state and the human's internal state.
//!
//! The information state is the pair `(b_s, b_x)` of marginal beliefs, which
//! factorize the joint posterior over `(x, s)`. [`JointFilter`] tracks the
//! unfactored joint posterior directly and is used to check that claim.

use serde::{Deserialize, Serialize};

use crate::human::HumanModel;
use crate::pomdp::{build_human_ai_pomdp, Distribution, EnvModel, JointPomdp};
use crate::{Error, Result};

/// How the internal-state belief is propagated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Conditions on the observed human action before propagating.
    #[default]
    Bayes,
    /// Propagates through the internal dynamics only, ignoring `u_h`.
    PaperLiteral,
}

impl std::str::FromStr for FilterMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bayes" => Ok(FilterMode::Bayes),
            "paper_literal" => Ok(FilterMode::PaperLiteral),
            other => Err(format!("unknown filter mode {other:?} (expected bayes|paper_literal)")),
        }
    }
}

/// `(b_s, b_x)`: beliefs over internal states and over system states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoState {
    pub b_s: Distribution,
    pub b_x: Distribution,
}

impl InfoState {
    /// Outer product `b_x ⊗ b_s`, indexed `x·|S| + s`.
    pub fn product(&self) -> Vec<f64> {
        product_belief(&self.b_x, &self.b_s)
    }
}

pub fn product_belief(b_x: &Distribution, b_s: &Distribution) -> Vec<f64> {
    b_x.probs()
        .iter()
        .flat_map(|&px| b_s.probs().iter().map(move |&ps| px * ps))
        .collect()
}

/// Observed history `y_{0:t}`, `u_h_{0:t-1}`, `u_ai_{0:t-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub observations: Vec<usize>,
    pub human_actions: Vec<usize>,
    pub recommendations: Vec<usize>,
}

impl HistoryRecord {
    pub fn new(y0: usize) -> Self {
        Self {
            observations: vec![y0],
            human_actions: Vec::new(),
            recommendations: Vec::new(),
        }
    }

    pub fn push(&mut self, u_ai: usize, u_h: usize, y_next: usize) {
        self.recommendations.push(u_ai);
        self.human_actions.push(u_h);
        self.observations.push(y_next);
    }

    /// Current time index.
    pub fn t(&self) -> usize {
        self.recommendations.len()
    }

    pub fn is_consistent(&self) -> bool {
        self.observations.len() == self.t() + 1 && self.human_actions.len() == self.t()
    }

    /// Steps `(u_ai_k, u_h_k, y_{k+1})`.
    pub fn steps(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.t()).map(move |k| {
            (
                self.recommendations[k],
                self.human_actions[k],
                self.observations[k + 1],
            )
        })
    }
}

/// `P(x_0 | y_0)` from the environment prior.
pub fn initial_state_belief(env: &EnvModel, y0: usize) -> Result<Distribution> {
    env.check_obs(y0)?;
    let prior = env.initial_distribution();
    let w = (0..env.n_states())
        .map(|x| prior.get(x) * env.observation_row(x)[y0])
        .collect();
    Distribution::from_weights(w).ok_or(Error::ImpossibleObservation)
}

pub fn initial_info_state(env: &EnvModel, human: &HumanModel, y0: usize) -> Result<InfoState> {
    Ok(InfoState {
        b_s: human.initial_distribution(),
        b_x: initial_state_belief(env, y0)?,
    })
}

/// Unnormalized `P(x', y' | b_x, u_h) = P(y'|x') Σ_x P(x'|x,u_h) b_x(x)`.
fn state_joint_weights(b_x: &Distribution, u_h: usize, y_next: usize, env: &EnvModel) -> Vec<f64> {
    let n = env.n_states();
    let mut predicted = vec![0.0; n];
    for (x, &p) in b_x.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (x2, &t) in env.transition_row(x, u_h).iter().enumerate() {
            predicted[x2] += t * p;
        }
    }
    for (x2, w) in predicted.iter_mut().enumerate() {
        *w *= env.observation_row(x2)[y_next];
    }
    predicted
}

/// System-state belief update after the human implemented `u_h` and `y'` was
/// observed. Depends on neither the recommendation nor the human model.
pub fn update_state_belief(
    b_x: &Distribution,
    u_h: usize,
    y_next: usize,
    env: &EnvModel,
) -> Result<Distribution> {
    env.check_action(u_h)?;
    env.check_obs(y_next)?;
    Distribution::from_weights(state_joint_weights(b_x, u_h, y_next, env))
        .ok_or(Error::ImpossibleObservation)
}

/// Internal-state belief update.
///
/// - [`FilterMode::Bayes`]: `b'(s') ∝ Σ_s P(s'|s,u_ai,y')·P(u_h|s,u_ai)·b(s)`.
/// - [`FilterMode::PaperLiteral`]: `b'(s') = Σ_s P(s'|s,u_ai,y')·b(s)`; `u_h` is
///   ignored.
pub fn update_internal_belief(
    b_s: &Distribution,
    u_ai: usize,
    u_h: usize,
    y_next: usize,
    human: &HumanModel,
    mode: FilterMode,
) -> Result<Distribution> {
    let n = human.n_internal();
    crate::pomdp::check_index_pub("action", u_ai, human.n_actions())?;
    crate::pomdp::check_index_pub("action", u_h, human.n_actions())?;
    crate::pomdp::check_index_pub("observation", y_next, human.n_obs())?;
    let mut w = vec![0.0; n];
    for (s, &p) in b_s.probs().iter().enumerate() {
        let likelihood = match mode {
            FilterMode::Bayes => human.policy_row(s, u_ai)[u_h],
            FilterMode::PaperLiteral => 1.0,
        };
        let mass = p * likelihood;
        if mass == 0.0 {
            continue;
        }
        for (s2, &d) in human.dynamics_row(s, u_ai, y_next).iter().enumerate() {
            w[s2] += d * mass;
        }
    }
    Distribution::from_weights(w).ok_or(Error::ImpossibleHumanAction)
}

/// Applies both updates to an information state.
pub fn info_state_step(
    pi: &InfoState,
    u_ai: usize,
    u_h: usize,
    y_next: usize,
    env: &EnvModel,
    human: &HumanModel,
    mode: FilterMode,
) -> Result<InfoState> {
    // internal first so that an impossible human action is reported as such
    let b_s = update_internal_belief(&pi.b_s, u_ai, u_h, y_next, human, mode)?;
    let b_x = update_state_belief(&pi.b_x, u_h, y_next, env)?;
    Ok(InfoState { b_s, b_x })
}

/// Runs the factored filter along a history.
pub fn filter_history(
    history: &HistoryRecord,
    env: &EnvModel,
    human: &HumanModel,
    mode: FilterMode,
) -> Result<InfoState> {
    let mut pi = initial_info_state(env, human, history.observations[0])?;
    for (u_ai, u_h, y) in history.steps() {
        pi = info_state_step(&pi, u_ai, u_h, y, env, human, mode)?;
    }
    Ok(pi)
}

/// `P(u_h | b_s, u_ai) = Σ_s b_s(s)·P(u_h|s,u_ai)`.
pub fn predict_human_action(b_s: &Distribution, u_ai: usize, human: &HumanModel) -> Distribution {
    let mut w = vec![0.0; human.n_actions()];
    for (s, &p) in b_s.probs().iter().enumerate() {
        for (u_h, &q) in human.policy_row(s, u_ai).iter().enumerate() {
            w[u_h] += p * q;
        }
    }
    Distribution::from_weights(w).expect("mixture of stochastic rows has unit mass")
}

/// `P(y' | b_x, u_h)` for every `y'`.
pub fn predict_observation(b_x: &Distribution, u_h: usize, env: &EnvModel) -> Vec<f64> {
    (0..env.n_obs())
        .map(|y| state_joint_weights(b_x, u_h, y, env).iter().sum())
        .collect()
}

/// Joint prediction `P(y', u_h | b_x, u_ai)` given a distribution over the
/// implemented action, indexed `y'·|U| + u_h`.
pub fn predict_next(b_x: &Distribution, action_dist: &Distribution, env: &EnvModel) -> Vec<f64> {
    let nu = env.n_actions();
    let mut out = vec![0.0; env.n_obs() * nu];
    for (u_h, &p) in action_dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (y, q) in predict_observation(b_x, u_h, env).into_iter().enumerate() {
            out[y * nu + u_h] = p * q;
        }
    }
    out
}

/// `Σ_x b_x(x) Σ_{u_h} P(u_h)·r(x,u_h)`.
pub fn expected_reward(b_x: &Distribution, action_dist: &Distribution, env: &EnvModel) -> f64 {
    b_x.probs()
        .iter()
        .enumerate()
        .map(|(x, &px)| {
            px * action_dist
                .probs()
                .iter()
                .enumerate()
                .map(|(u, &pu)| pu * env.reward(x, u))
                .sum::<f64>()
        })
        .sum()
}

/// Histories longer than this are refused by the joint oracle.
pub const ORACLE_MAX_T: usize = 8;

/// Posterior over joint states `(x, s)` computed without assuming any
/// factorization, by propagating the full joint through the human-AI POMDP
/// kernel. Summing over latent trajectories one step at a time gives exactly
/// the same numbers as enumerating them, at linear cost in `t`.
#[derive(Debug, Clone)]
pub struct JointFilter {
    joint: JointPomdp,
}

impl JointFilter {
    pub fn new(env: &EnvModel, human: &HumanModel) -> Result<Self> {
        Ok(Self {
            joint: build_human_ai_pomdp(env, human)?,
        })
    }

    pub fn pomdp(&self) -> &JointPomdp {
        &self.joint
    }

    pub fn initial(&self, y0: usize) -> Result<Distribution> {
        self.joint.initial_posterior(y0).ok_or(Error::HistoryImpossible)
    }

    /// Unnormalized successor weights together with their total
    /// `P(y', u_h | belief, u_ai)`.
    pub fn step_weights(&self, belief: &[f64], u_ai: usize, u_h: usize, y_next: usize) -> Vec<f64> {
        let j = &self.joint;
        let (ny, nu) = (j.n_obs(), j.n_actions());
        let mut w = vec![0.0; j.n_joint()];
        for (k, &p) in belief.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = j.kernel_row(k, u_ai);
            for (k2, out) in w.iter_mut().enumerate() {
                *out += p * row[(k2 * ny + y_next) * nu + u_h];
            }
        }
        w
    }

    pub fn step(&self, belief: &Distribution, u_ai: usize, u_h: usize, y_next: usize) -> Result<Distribution> {
        Distribution::from_weights(self.step_weights(belief.probs(), u_ai, u_h, y_next))
            .ok_or(Error::HistoryImpossible)
    }

    pub fn posterior(&self, history: &HistoryRecord) -> Result<Distribution> {
        if !history.is_consistent() {
            return Err(Error::DimensionMismatch("inconsistent history lengths".into()));
        }
        if history.t() > ORACLE_MAX_T {
            return Err(Error::HorizonTooLarge {
                horizon: history.t(),
                limit: ORACLE_MAX_T,
            });
        }
        let mut b = self.initial(history.observations[0])?;
        for (u_ai, u_h, y) in history.steps() {
            b = self.step(&b, u_ai, u_h, y)?;
        }
        Ok(b)
    }

    /// Marginals `(b_s, b_x)` of a joint belief indexed `x·|S| + s`.
    pub fn marginals(&self, belief: &Distribution) -> InfoState {
        let (nx, ns) = (self.joint.n_system_states(), self.joint.n_internal());
        let mut bx = vec![0.0; nx];
        let mut bs = vec![0.0; ns];
        for x in 0..nx {
            for s in 0..ns {
                let p = belief.get(x * ns + s);
                bx[x] += p;
                bs[s] += p;
            }
        }
        InfoState {
            b_s: Distribution::from_weights(bs).expect("marginal of a distribution"),
            b_x: Distribution::from_weights(bx).expect("marginal of a distribution"),
        }
    }
}

/// Exact `P(x_t, s_t | h_t)` for a history of length `t ≤ 8`, indexed
/// `x·|S| + s`.
pub fn joint_filter_oracle(history: &HistoryRecord, env: &EnvModel, human: &HumanModel) -> Result<Distribution> {
    JointFilter::new(env, human)?.posterior(history)
}
