use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tv_distance, HumanPredictor};
use crate::belief::{initial_state_belief, predict_human_action, update_internal_belief, update_state_belief, FilterMode};
use crate::human::HumanModel;
use crate::pomdp::{sample_row, Distribution, EnvModel};
use crate::rng::{self, streams, Stream};
use crate::Result;

/// Recommendation strategy used to visit histories: uniform over `allowed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStrategy {
    pub allowed: Vec<usize>,
}

impl ProbeStrategy {
    pub fn uniform(n_actions: usize) -> Self {
        Self {
            allowed: (0..n_actions).collect(),
        }
    }

    pub fn excluding(n_actions: usize, excluded: &[usize]) -> Self {
        Self {
            allowed: (0..n_actions).filter(|u| !excluded.contains(u)).collect(),
        }
    }

    pub(crate) fn draw(&self, r: &mut Stream) -> usize {
        self.allowed[r.gen_range(0..self.allowed.len())]
    }
}

/// Prediction error statistics for one `(ŝ, u_ai)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub state: usize,
    pub u_ai: usize,
    pub count: usize,
    pub max_tv: f64,
    pub mean_tv: f64,
}

/// Sampled estimate of the AHM accuracy ε: the largest total variation distance
/// between the true and predicted human action distributions over every
/// visited history and every recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCertificate {
    pub eps_max: f64,
    pub eps_mean: f64,
    pub n_rollouts: usize,
    pub rollout_len: usize,
    /// Histories visited (every prefix of every rollout).
    pub n_histories: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellStat>,
}

/// Visited state of a sampled rollout.
pub(crate) struct HistoryView<'a, S> {
    pub b_s: &'a Distribution,
    pub b_x: &'a Distribution,
    pub predictor_state: &'a S,
}

/// Simulates one rollout of `len` steps under `probe` with the true human and
/// calls `visit` on every history prefix `h_0 .. h_len`. Internal-state
/// beliefs use the Bayes filter.
pub(crate) fn walk_rollout<P: HumanPredictor>(
    predictor: &P,
    env: &EnvModel,
    human: &HumanModel,
    probe: &ProbeStrategy,
    len: usize,
    r: &mut Stream,
    mut visit: impl FnMut(HistoryView<'_, P::State>),
) -> Result<()> {
    let mut x = env.initial_distribution().sample(r);
    let mut s = human.initial_distribution().sample(r);
    let y0 = sample_row(env.observation_row(x), r);
    let mut b_s = human.initial_distribution();
    let mut b_x = initial_state_belief(env, y0)?;
    let mut p_state = predictor.init(y0);
    for t in 0..=len {
        visit(HistoryView {
            b_s: &b_s,
            b_x: &b_x,
            predictor_state: &p_state,
        });
        if t == len {
            break;
        }
        let u_ai = probe.draw(r);
        let u_h = human.sample_action(r, s, u_ai);
        let x2 = sample_row(env.transition_row(x, u_h), r);
        let y2 = sample_row(env.observation_row(x2), r);
        let s2 = human.sample_internal(r, s, u_ai, y2);
        b_s = update_internal_belief(&b_s, u_ai, u_h, y2, human, FilterMode::Bayes)?;
        b_x = update_state_belief(&b_x, u_h, y2, env)?;
        p_state = predictor.advance(&p_state, u_ai, u_h, y2)?;
        x = x2;
        s = s2;
    }
    Ok(())
}

/// Estimates ε by sweeping every recommendation at every history visited by
/// `n_rollouts` rollouts of `rollout_len` steps.
///
/// The true action distribution at a history is `Σ_s b_s(s)·P(u_h|s,u_ai)`
/// with `b_s` from the exact Bayes filter. Rollouts run in parallel with
/// per-rollout streams and are merged in rollout order.
#[allow(clippy::too_many_arguments)]
pub fn certify_epsilon<P: HumanPredictor>(
    predictor: &P,
    env: &EnvModel,
    human: &HumanModel,
    probe: &ProbeStrategy,
    n_rollouts: usize,
    rollout_len: usize,
    seed: u64,
) -> Result<EpsilonCertificate> {
    let n_actions = env.n_actions();
    let per_rollout: Vec<Vec<(Option<usize>, usize, f64)>> = (0..n_rollouts)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::child_stream(seed, streams::CERTIFY, k as u64);
            let mut out = Vec::with_capacity((rollout_len + 1) * n_actions);
            let mut err = None;
            walk_rollout(predictor, env, human, probe, rollout_len, &mut r, |view| {
                for u_ai in 0..n_actions {
                    let truth = predict_human_action(view.b_s, u_ai, human);
                    let approx = predictor.predict(view.predictor_state, u_ai);
                    match tv_distance(&truth, &approx) {
                        Ok(tv) => out.push((predictor.state_index(view.predictor_state), u_ai, tv)),
                        Err(e) => err = Some(e),
                    }
                }
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok(out),
            }
        })
        .collect::<Result<_>>()?;

    let mut eps_max: f64 = 0.0;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut cells: std::collections::BTreeMap<(usize, usize), (usize, f64, f64)> = Default::default();
    for (state, u_ai, tv) in per_rollout.into_iter().flatten() {
        eps_max = eps_max.max(tv);
        total += tv;
        count += 1;
        if let Some(i) = state {
            let c = cells.entry((i, u_ai)).or_insert((0, 0.0, 0.0));
            c.0 += 1;
            c.1 = c.1.max(tv);
            c.2 += tv;
        }
    }
    Ok(EpsilonCertificate {
        eps_max,
        eps_mean: if count > 0 { total / count as f64 } else { 0.0 },
        n_rollouts,
        rollout_len,
        n_histories: n_rollouts * (rollout_len + 1),
        seed,
        cells: cells
            .into_iter()
            .map(|((state, u_ai), (count, max_tv, sum))| CellStat {
                state,
                u_ai,
                count,
                max_tv,
                mean_tv: sum / count as f64,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahm::{Ahm, ExactBeliefPredictor, Mlp};
    use crate::harness::machine::{machine_default, RewardVariant};
    use crate::human::lazy_operator_with_initial;

    #[test]
    fn exact_belief_predictor_has_zero_error() {
        let env = machine_default(RewardVariant::R1);
        let human = lazy_operator_with_initial(2, vec![0.5, 0.5]);
        let exact = ExactBeliefPredictor {
            human: &human,
            mode: FilterMode::Bayes,
        };
        let cert = certify_epsilon(&exact, &env, &human, &ProbeStrategy::uniform(4), 50, 20, 3).unwrap();
        assert!(cert.eps_max <= 1e-9, "{}", cert.eps_max);
        assert_eq!(cert.n_histories, 50 * 21);
    }

    #[test]
    fn sweep_covers_unprobed_recommendations() {
        let env = machine_default(RewardVariant::R1);
        let human = crate::human::lazy_operator(2);
        let ahm = Ahm::with_mlp(2, 4, Mlp::decoder(8, 4, 5)).unwrap();
        let probe = ProbeStrategy::excluding(4, &[2]);
        let cert = certify_epsilon(&ahm, &env, &human, &probe, 20, 10, 9).unwrap();
        assert!(cert.cells.iter().any(|c| c.u_ai == 2 && c.count > 0));
        for c in &cert.cells {
            assert!(c.max_tv <= cert.eps_max);
        }
        assert!((0.0..=1.0).contains(&cert.eps_max));
        let again = certify_epsilon(&ahm, &env, &human, &probe, 20, 10, 9).unwrap();
        assert_eq!(cert, again);
    }
}
