use crate::human::HumanModel;
use crate::pomdp::EnvModel;
use crate::{Error, Result};

use super::agent::Agent;

/// Longest horizon accepted by exact trajectory enumeration.
pub const EXACT_EVAL_MAX_T: usize = 6;

/// Expected discounted return `E[Σ_{t≤T} γ^t r(X_t, U^h_t)]` of an agent,
/// summed over every trajectory of positive probability. Without a human
/// every recommendation is implemented.
pub fn evaluate_agent_exact<A: Agent>(agent: &A, env: &EnvModel, human: Option<&HumanModel>, horizon: usize) -> Result<f64> {
    evaluate_agent_exact_discounted(agent, env, human, horizon, env.discount)
}

/// As [`evaluate_agent_exact`] with an explicit discount factor.
pub fn evaluate_agent_exact_discounted<A: Agent>(
    agent: &A,
    env: &EnvModel,
    human: Option<&HumanModel>,
    horizon: usize,
    discount: f64,
) -> Result<f64> {
    if horizon > EXACT_EVAL_MAX_T {
        return Err(Error::HorizonTooLarge {
            horizon,
            limit: EXACT_EVAL_MAX_T,
        });
    }
    let adherent;
    let human = match human {
        Some(h) => h,
        None => {
            adherent = HumanModel::fully_adherent(env.n_actions(), env.n_obs());
            &adherent
        }
    };
    let (nx, ns) = (env.n_states(), human.n_internal());
    let px = env.initial_distribution();
    let ps = human.initial_distribution();
    let ctx = Ctx {
        env,
        human,
        horizon,
        discount,
    };
    let mut total = 0.0;
    for y0 in 0..env.n_obs() {
        let mut w = vec![0.0; nx * ns];
        for x in 0..nx {
            for s in 0..ns {
                w[x * ns + s] = px.get(x) * ps.get(s) * env.observation_row(x)[y0];
            }
        }
        if w.iter().sum::<f64>() <= 0.0 {
            continue;
        }
        let mut a = agent.clone();
        a.reset(y0)?;
        total += ctx.node(&a, 0, &w)?;
    }
    Ok(total)
}

struct Ctx<'a> {
    env: &'a EnvModel,
    human: &'a HumanModel,
    horizon: usize,
    discount: f64,
}

impl Ctx<'_> {
    /// Discounted reward collected from time `t` on, weighted by the
    /// unnormalized joint `P(x_t, s_t, h_t)`.
    fn node<A: Agent>(&self, agent: &A, t: usize, w: &[f64]) -> Result<f64> {
        let (env, human) = (self.env, self.human);
        let (nx, ns, nu, ny) = (env.n_states(), human.n_internal(), env.n_actions(), env.n_obs());
        let a = agent.recommend(t)?;
        let scale = self.discount.powi(t as i32);
        let mut value = 0.0;
        for x in 0..nx {
            for s in 0..ns {
                let p = w[x * ns + s];
                if p == 0.0 {
                    continue;
                }
                let r: f64 = human.policy_row(s, a).iter().enumerate().map(|(u, &q)| q * env.reward(x, u)).sum();
                value += p * r;
            }
        }
        value *= scale;
        if t == self.horizon {
            return Ok(value);
        }
        for u_h in 0..nu {
            for y in 0..ny {
                let mut next = vec![0.0; nx * ns];
                for x in 0..nx {
                    for s in 0..ns {
                        let p = w[x * ns + s] * human.policy_row(s, a)[u_h];
                        if p == 0.0 {
                            continue;
                        }
                        let dyn_row = human.dynamics_row(s, a, y);
                        for (x2, &tp) in env.transition_row(x, u_h).iter().enumerate() {
                            let q = p * tp * env.observation_row(x2)[y];
                            if q == 0.0 {
                                continue;
                            }
                            for (s2, &d) in dyn_row.iter().enumerate() {
                                next[x2 * ns + s2] += q * d;
                            }
                        }
                    }
                }
                if next.iter().sum::<f64>() <= 0.0 {
                    continue;
                }
                let mut child = agent.clone();
                child.observe(a, u_h, y)?;
                value += self.node(&child, t + 1, &next)?;
            }
        }
        Ok(value)
    }
}
