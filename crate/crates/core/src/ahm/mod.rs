//! Approximate human model: an empirical adherence state whose evolution is
//! fixed in advance, and a trained feed-forward predictor `μ̂(u_h | ŝ, u_ai)`.

mod adherence;
mod certify;
mod mlp;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{predict_human_action, update_internal_belief, FilterMode};
use crate::human::HumanModel;
use crate::pomdp::Distribution;
use crate::{Error, Result};

pub use adherence::{adherence_init, adherence_step, decoder_input, AdherenceState};
pub use certify::{certify_epsilon, CellStat, EpsilonCertificate, ProbeStrategy};
pub(crate) use certify::walk_rollout;
pub use mlp::{Activation, Gradient, Layer, Mlp, DECODER_HIDDEN};
pub use train::{train_decoder, Sample, TrainConfig, TrainReport, TrainingMeta};

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    tv_distance_slices(p.probs(), q.probs())
}

pub fn tv_distance_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "supports of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Anything that compresses the history into a state and predicts the human's
/// next action from it.
pub trait HumanPredictor: Sync {
    type State: Clone + Send;

    fn init(&self, y0: usize) -> Self::State;

    fn advance(&self, state: &Self::State, u_ai: usize, u_h: usize, y_next: usize) -> Result<Self::State>;

    fn predict(&self, state: &Self::State, u_ai: usize) -> Distribution;

    /// Dense index of a finite state, used to tabulate diagnostics.
    fn state_index(&self, _state: &Self::State) -> Option<usize> {
        None
    }
}

/// How an [`Ahm`] turns `(ŝ, u_ai)` into a distribution over actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    Mlp(Mlp),
    /// Rows indexed `ŝ·|U| + u_ai`.
    Table(Vec<Vec<f64>>),
}

/// Adherence-state AHM over `4·|Y|` approximate states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ahm {
    pub n_obs: usize,
    pub n_actions: usize,
    pub predictor: Predictor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonCertificate>,
}

impl Ahm {
    pub fn with_mlp(n_obs: usize, n_actions: usize, net: Mlp) -> Result<Self> {
        net.check()?;
        if net.input_dim() != n_obs + 2 + n_actions || net.output_dim() != n_actions {
            return Err(Error::DimensionMismatch(format!(
                "network {:?} does not map {} features to {} actions",
                net.layer_sizes(),
                n_obs + 2 + n_actions,
                n_actions
            )));
        }
        Ok(Self {
            n_obs,
            n_actions,
            predictor: Predictor::Mlp(net),
            training: None,
            epsilon: None,
        })
    }

    /// Table predictor; `rows[ŝ·|U| + u_ai]` must each be a distribution.
    pub fn with_table(n_obs: usize, n_actions: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != AdherenceState::count(n_obs) * n_actions {
            return Err(Error::DimensionMismatch(format!(
                "{} table rows, expected {}",
                rows.len(),
                AdherenceState::count(n_obs) * n_actions
            )));
        }
        for row in &rows {
            if row.len() != n_actions {
                return Err(Error::DimensionMismatch("table row length".into()));
            }
            Distribution::new(row.clone())?;
        }
        Ok(Self {
            n_obs,
            n_actions,
            predictor: Predictor::Table(rows),
            training: None,
            epsilon: None,
        })
    }

    /// Table predictor that ignores `ŝ` and uses the single-internal-state
    /// human's policy, e.g. a fully adherent human.
    pub fn from_single_state_human(human: &HumanModel) -> Result<Self> {
        if human.n_internal() != 1 {
            return Err(Error::DimensionMismatch(
                "table AHM needs a human with one internal state".into(),
            ));
        }
        let n_actions = human.n_actions();
        let rows = (0..AdherenceState::count(human.n_obs()))
            .flat_map(|_| (0..n_actions).map(|u| human.policy_row(0, u).to_vec()))
            .collect();
        Self::with_table(human.n_obs(), n_actions, rows)
    }

    pub fn n_states(&self) -> usize {
        AdherenceState::count(self.n_obs)
    }

    pub fn predict_state(&self, state: &AdherenceState, u_ai: usize) -> Distribution {
        match &self.predictor {
            Predictor::Mlp(net) => net
                .forward(&decoder_input(state, u_ai, self.n_obs, self.n_actions))
                .expect("network validated at construction"),
            Predictor::Table(rows) => Distribution::new(rows[state.index() * self.n_actions + u_ai].clone())
                .expect("table validated at construction"),
        }
    }

    /// `μ̂(·|ŝ,u_ai)` for every `(ŝ, u_ai)`, indexed `ŝ·|U| + u_ai`.
    pub fn prediction_table(&self) -> Vec<Distribution> {
        (0..self.n_states())
            .flat_map(|i| {
                let s = AdherenceState::from_index(i);
                (0..self.n_actions).map(move |u| (s, u))
            })
            .map(|(s, u)| self.predict_state(&s, u))
            .collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let ahm: Ahm = serde_json::from_str(s)?;
        match &ahm.predictor {
            Predictor::Mlp(net) => {
                Self::with_mlp(ahm.n_obs, ahm.n_actions, net.clone())?;
            }
            Predictor::Table(rows) => {
                Self::with_table(ahm.n_obs, ahm.n_actions, rows.clone())?;
            }
        }
        Ok(ahm)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

impl HumanPredictor for Ahm {
    type State = AdherenceState;

    fn init(&self, y0: usize) -> AdherenceState {
        adherence_init(y0)
    }

    fn advance(&self, state: &AdherenceState, u_ai: usize, u_h: usize, y_next: usize) -> Result<AdherenceState> {
        Ok(adherence_step(*state, u_ai, u_h, y_next))
    }

    fn predict(&self, state: &AdherenceState, u_ai: usize) -> Distribution {
        self.predict_state(state, u_ai)
    }

    fn state_index(&self, state: &AdherenceState) -> Option<usize> {
        Some(state.index())
    }
}

/// Predictor whose state is the exact internal-state belief. Useful as a
/// reference: its prediction error against the true human is zero.
#[derive(Debug, Clone)]
pub struct ExactBeliefPredictor<'a> {
    pub human: &'a HumanModel,
    pub mode: FilterMode,
}

impl HumanPredictor for ExactBeliefPredictor<'_> {
    type State = Distribution;

    fn init(&self, _y0: usize) -> Distribution {
        self.human.initial_distribution()
    }

    fn advance(&self, state: &Distribution, u_ai: usize, u_h: usize, y_next: usize) -> Result<Distribution> {
        update_internal_belief(state, u_ai, u_h, y_next, self.human, self.mode)
    }

    fn predict(&self, state: &Distribution, u_ai: usize) -> Distribution {
        predict_human_action(state, u_ai, self.human)
    }
}
