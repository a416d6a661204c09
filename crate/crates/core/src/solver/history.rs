use std::collections::HashMap;

use crate::belief::{HistoryRecord, JointFilter};
use crate::human::HumanModel;
use crate::pomdp::EnvModel;
use crate::{Error, Result};

use super::alpha::TIE_TOL;

/// Longest horizon the history enumeration accepts.
pub const HISTORY_DP_MAX_T: usize = 3;

/// Optimal recommendation and value at one history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryDecision {
    pub action: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct HistoryDpResult {
    /// `E[V_0(h_0)]` over the first observation.
    pub value: f64,
    /// `V_0(y_0)`, `None` for impossible first observations.
    pub by_first_obs: Vec<Option<f64>>,
    /// Maximizing recommendation at every feasible history of length `≤ T`.
    pub strategy: HashMap<HistoryRecord, HistoryDecision>,
}

/// Backward induction over explicit histories of the human-AI POMDP.
///
/// Every feasible history `h_t` (`t ≤ T`) is expanded for every recommendation;
/// its posterior over `(x, s)` comes from the joint filter, so no
/// information-state argument is used.
pub fn history_dp_oracle(env: &EnvModel, human: &HumanModel, horizon: usize) -> Result<HistoryDpResult> {
    if horizon > HISTORY_DP_MAX_T {
        return Err(Error::HorizonTooLarge {
            horizon,
            limit: HISTORY_DP_MAX_T,
        });
    }
    let filter = JointFilter::new(env, human)?;
    let joint = filter.pomdp();
    let rewards: Vec<Vec<f64>> = (0..joint.n_actions()).map(|a| joint.expected_reward_vector(a)).collect();
    let mut ctx = Ctx {
        filter: &filter,
        rewards,
        horizon,
        discount: env.discount,
        strategy: HashMap::new(),
    };

    let prior = joint.initial();
    let mut value = 0.0;
    let mut by_first_obs = Vec::with_capacity(joint.n_obs());
    for y0 in 0..joint.n_obs() {
        let p_y0: f64 = (0..joint.n_joint())
            .map(|j| prior[j] * joint.observation_row(j / joint.n_internal())[y0])
            .sum();
        if p_y0 == 0.0 {
            by_first_obs.push(None);
            continue;
        }
        let belief = filter.initial(y0)?;
        let mut history = HistoryRecord::new(y0);
        let v = ctx.solve(&mut history, belief.probs())?;
        value += p_y0 * v;
        by_first_obs.push(Some(v));
    }
    Ok(HistoryDpResult {
        value,
        by_first_obs,
        strategy: ctx.strategy,
    })
}

struct Ctx<'a> {
    filter: &'a JointFilter,
    rewards: Vec<Vec<f64>>,
    horizon: usize,
    discount: f64,
    strategy: HashMap<HistoryRecord, HistoryDecision>,
}

impl Ctx<'_> {
    fn solve(&mut self, history: &mut HistoryRecord, belief: &[f64]) -> Result<f64> {
        let joint = self.filter.pomdp();
        let t = history.t();
        let mut best: Option<HistoryDecision> = None;
        for a in 0..joint.n_actions() {
            let mut q: f64 = belief.iter().zip(&self.rewards[a]).map(|(b, r)| b * r).sum();
            if t < self.horizon {
                let mut cont = 0.0;
                for y in 0..joint.n_obs() {
                    for u_h in 0..joint.n_actions() {
                        let w = self.filter.step_weights(belief, a, u_h, y);
                        let mass: f64 = w.iter().sum();
                        if mass <= 0.0 {
                            continue;
                        }
                        let next: Vec<f64> = w.iter().map(|v| v / mass).collect();
                        history.push(a, u_h, y);
                        let v = self.solve(history, &next);
                        history.observations.pop();
                        history.human_actions.pop();
                        history.recommendations.pop();
                        cont += mass * v?;
                    }
                }
                q += self.discount * cont;
            }
            match best {
                Some(b) if q <= b.value + TIE_TOL => {}
                _ => best = Some(HistoryDecision { action: a, value: q }),
            }
        }
        let best = best.expect("at least one action");
        self.strategy.insert(history.clone(), best);
        Ok(best.value)
    }
}
