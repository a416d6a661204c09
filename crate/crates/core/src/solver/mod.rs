//! Finite-horizon planners: a history-enumeration oracle, point-based DP on
//! the exact information state, and DP over `Ŝ×Δ(X)` for the approximate
//! human model and the adherence-assuming baseline. All solvers maximize
//! expected discounted reward.

mod agent;
mod alpha;
mod evaluate;
mod history;
mod pbvi;
mod planar;

pub use agent::{Agent, AhmAgent, ExactAgent, NaiveAgent};
pub use alpha::{prune_dominated, AlphaVector, Policy, SolverKind, TIE_TOL};
pub use evaluate::{evaluate_agent_exact, evaluate_agent_exact_discounted, EXACT_EVAL_MAX_T};
pub use history::{history_dp_oracle, HistoryDecision, HistoryDpResult, HISTORY_DP_MAX_T};
pub use pbvi::{expand_beliefs, solve_exact_info_state, solve_on_points, PbviConfig};
pub use planar::{simplex_grid, solve_ahm, solve_naive, solve_observed, BackupMode, ObservedModel};

use crate::ahm::Ahm;
use crate::belief::FilterMode;
use crate::human::HumanModel;
use crate::pomdp::EnvModel;
use crate::{Error, Result};

/// Exact expected return of a solved policy, run with the agent matching its
/// kind. AHM policies need the AHM; exact policies use Bayes filtering with
/// the true human model.
pub fn evaluate_policy_exact(
    policy: &Policy,
    env: &EnvModel,
    human: Option<&HumanModel>,
    ahm: Option<&Ahm>,
    horizon: usize,
) -> Result<f64> {
    let tail;
    let policy = if policy.horizon == horizon {
        policy
    } else {
        tail = policy.tail(horizon)?;
        &tail
    };
    match policy.kind {
        SolverKind::ExactInfoState => {
            let h = human.ok_or_else(|| Error::Domain("exact policy needs the human model".into()))?;
            evaluate_agent_exact(&ExactAgent::new(policy, env, h, FilterMode::Bayes)?, env, human, horizon)
        }
        SolverKind::Ahm => {
            let m = ahm.ok_or_else(|| Error::Domain("AHM policy needs the AHM".into()))?;
            evaluate_agent_exact(&AhmAgent::new(policy, env, m)?, env, human, horizon)
        }
        SolverKind::Naive => evaluate_agent_exact(&NaiveAgent::new(policy, env)?, env, human, horizon),
    }
}
