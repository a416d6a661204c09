//! Recommendation agents: a policy plus the information state it is read on.

use crate::ahm::{adherence_init, adherence_step, AdherenceState, Ahm};
use crate::belief::{info_state_step, initial_info_state, initial_state_belief, update_state_belief, FilterMode, InfoState};
use crate::human::HumanModel;
use crate::pomdp::{Distribution, EnvModel};
use crate::{Error, Result};

use super::alpha::{Policy, SolverKind};

/// Closed-loop recommender. `reset` is called with `y_0`, then
/// `recommend`/`observe` alternate.
pub trait Agent: Clone + Send + Sync {
    fn reset(&mut self, y0: usize) -> Result<()>;

    fn recommend(&self, t: usize) -> Result<usize>;

    fn observe(&mut self, u_ai: usize, u_h: usize, y_next: usize) -> Result<()>;

    /// Index of the agent's approximate human state, if it keeps one.
    fn approx_state(&self) -> Option<usize> {
        None
    }
}

fn expect_kind(policy: &Policy, kind: SolverKind) -> Result<()> {
    if policy.kind != kind {
        return Err(Error::Domain(format!(
            "agent expects a {kind:?} policy, got {:?}",
            policy.kind
        )));
    }
    Ok(())
}

fn not_reset() -> Error {
    Error::Domain("agent used before reset".into())
}

/// Acts on the exact information state `(b_s, b_x)` of a known human model.
#[derive(Debug, Clone)]
pub struct ExactAgent<'a> {
    policy: &'a Policy,
    env: &'a EnvModel,
    human: &'a HumanModel,
    mode: FilterMode,
    info: Option<InfoState>,
}

impl<'a> ExactAgent<'a> {
    pub fn new(policy: &'a Policy, env: &'a EnvModel, human: &'a HumanModel, mode: FilterMode) -> Result<Self> {
        expect_kind(policy, SolverKind::ExactInfoState)?;
        Ok(Self {
            policy,
            env,
            human,
            mode,
            info: None,
        })
    }

    pub fn info_state(&self) -> Option<&InfoState> {
        self.info.as_ref()
    }
}

impl Agent for ExactAgent<'_> {
    fn reset(&mut self, y0: usize) -> Result<()> {
        self.info = Some(initial_info_state(self.env, self.human, y0)?);
        Ok(())
    }

    fn recommend(&self, t: usize) -> Result<usize> {
        let info = self.info.as_ref().ok_or_else(not_reset)?;
        self.policy.greedy_action(t, 0, &info.product())
    }

    fn observe(&mut self, u_ai: usize, u_h: usize, y_next: usize) -> Result<()> {
        let info = self.info.as_ref().ok_or_else(not_reset)?;
        self.info = Some(info_state_step(info, u_ai, u_h, y_next, self.env, self.human, self.mode)?);
        Ok(())
    }
}

/// Acts on `(ŝ, b_x)`: the adherence state and the Bayes belief over system
/// states given the implemented actions.
#[derive(Debug, Clone)]
pub struct AhmAgent<'a> {
    policy: &'a Policy,
    env: &'a EnvModel,
    state: Option<(AdherenceState, Distribution)>,
}

impl<'a> AhmAgent<'a> {
    pub fn new(policy: &'a Policy, env: &'a EnvModel, ahm: &Ahm) -> Result<Self> {
        expect_kind(policy, SolverKind::Ahm)?;
        if policy.n_approx_states != ahm.n_states() {
            return Err(Error::DimensionMismatch(format!(
                "policy over {} approximate states, AHM has {}",
                policy.n_approx_states,
                ahm.n_states()
            )));
        }
        Ok(Self {
            policy,
            env,
            state: None,
        })
    }

    pub fn belief(&self) -> Option<&Distribution> {
        self.state.as_ref().map(|(_, b)| b)
    }
}

impl Agent for AhmAgent<'_> {
    fn reset(&mut self, y0: usize) -> Result<()> {
        self.state = Some((adherence_init(y0), initial_state_belief(self.env, y0)?));
        Ok(())
    }

    fn recommend(&self, t: usize) -> Result<usize> {
        let (s, b) = self.state.as_ref().ok_or_else(not_reset)?;
        self.policy.greedy_action(t, s.index(), b.probs())
    }

    fn observe(&mut self, u_ai: usize, u_h: usize, y_next: usize) -> Result<()> {
        let (s, b) = self.state.as_ref().ok_or_else(not_reset)?;
        let s2 = adherence_step(*s, u_ai, u_h, y_next);
        let b2 = update_state_belief(b, u_h, y_next, self.env)?;
        self.state = Some((s2, b2));
        Ok(())
    }

    fn approx_state(&self) -> Option<usize> {
        self.state.as_ref().map(|(s, _)| s.index())
    }
}

/// Acts on `b_x` alone, updated as if every recommendation were implemented.
#[derive(Debug, Clone)]
pub struct NaiveAgent<'a> {
    policy: &'a Policy,
    env: &'a EnvModel,
    belief: Option<Distribution>,
}

impl<'a> NaiveAgent<'a> {
    pub fn new(policy: &'a Policy, env: &'a EnvModel) -> Result<Self> {
        expect_kind(policy, SolverKind::Naive)?;
        Ok(Self {
            policy,
            env,
            belief: None,
        })
    }

    pub fn belief(&self) -> Option<&Distribution> {
        self.belief.as_ref()
    }
}

impl Agent for NaiveAgent<'_> {
    fn reset(&mut self, y0: usize) -> Result<()> {
        self.belief = Some(initial_state_belief(self.env, y0)?);
        Ok(())
    }

    fn recommend(&self, t: usize) -> Result<usize> {
        let b = self.belief.as_ref().ok_or_else(not_reset)?;
        self.policy.greedy_action(t, 0, b.probs())
    }

    fn observe(&mut self, u_ai: usize, _u_h: usize, y_next: usize) -> Result<()> {
        let b = self.belief.as_ref().ok_or_else(not_reset)?;
        self.belief = Some(update_state_belief(b, u_ai, y_next, self.env)?);
        Ok(())
    }
}
