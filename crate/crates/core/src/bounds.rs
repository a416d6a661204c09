//! Optimality-gap bound for planning with an ε-accurate approximate human
//! model, and the per-history inequalities it rests on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ahm::{tv_distance, walk_rollout, HumanPredictor, ProbeStrategy};
use crate::belief::{expected_reward, predict_human_action, predict_next};
use crate::human::HumanModel;
use crate::pomdp::EnvModel;
use crate::rng::{self, streams};
use crate::solver::{Policy, SolverKind};
use crate::{Error, Result};

/// Slack for floating-point noise when checking inequalities whose right-hand
/// side can be exactly zero.
pub const CHECK_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub epsilon: f64,
    pub r_max: f64,
    pub gamma: f64,
    pub horizon: usize,
    /// `max |α(x)|` over the AHM policy's vectors.
    pub v_hat_inf: f64,
    /// `r_max · Σ_{t=0}^T γ^t`, reported alongside for comparison.
    pub v_hat_ceiling: f64,
    pub bound: f64,
    /// `J(g*) − J(ĝ*)` when a reference value is available. The reference is
    /// a point-based lower bound on `J(g*)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_gap: Option<f64>,
}

impl GapReport {
    pub fn new(epsilon: f64, r_max: f64, gamma: f64, horizon: usize, v_hat_inf: f64) -> Result<Self> {
        let bound = optimality_gap_bound(epsilon, r_max, gamma, horizon, v_hat_inf)?;
        let v_hat_ceiling = r_max * (1.0 + geometric_tail(gamma, horizon));
        Ok(Self {
            epsilon,
            r_max,
            gamma,
            horizon,
            v_hat_inf,
            v_hat_ceiling,
            bound,
            measured_gap: None,
        })
    }

    pub fn with_measured_gap(mut self, gap: f64) -> Self {
        self.measured_gap = Some(gap);
        self
    }

    /// `Some(measured ≤ bound)` once a measured gap is attached.
    pub fn consistent(&self) -> Option<bool> {
        self.measured_gap.map(|g| g <= self.bound)
    }

    pub fn status(&self) -> &'static str {
        match self.consistent() {
            Some(true) => "CONSISTENT",
            Some(false) => "VIOLATED",
            None => "UNMEASURED",
        }
    }
}

/// `Σ_{t=1}^T γ^t = γ(1 − γ^T)/(1 − γ)`.
fn geometric_tail(gamma: f64, horizon: usize) -> f64 {
    gamma * (1.0 - gamma.powi(horizon as i32)) / (1.0 - gamma)
}

/// `4ε·(r_max + Σ_{t=1}^T γ^t (‖V̂‖∞ + r_max))`.
pub fn optimality_gap_bound(epsilon: f64, r_max: f64, gamma: f64, horizon: usize, v_hat_inf: f64) -> Result<f64> {
    let finite = [epsilon, r_max, gamma, v_hat_inf].iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("gap bound argument".into()));
    }
    if epsilon < 0.0 || r_max < 0.0 || v_hat_inf < 0.0 {
        return Err(Error::Domain("ε, r_max and ‖V̂‖∞ must be nonnegative".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("discount {gamma} outside (0, 1)")));
    }
    Ok(4.0 * epsilon * (r_max + geometric_tail(gamma, horizon) * (v_hat_inf + r_max)))
}

/// Largest absolute entry over every vector of an AHM policy, which bounds
/// `|V̂_t(ŝ, b_x)|` at every belief.
pub fn v_hat_sup(policy: &Policy) -> Result<f64> {
    if policy.kind != SolverKind::Ahm {
        return Err(Error::Domain(format!("expected an AHM policy, got {:?}", policy.kind)));
    }
    let mut any = false;
    let mut sup: f64 = 0.0;
    for v in policy.stages.iter().flatten().flatten() {
        for &x in &v.values {
            any = true;
            sup = sup.max(x.abs());
        }
    }
    if !any {
        return Err(Error::Domain("policy has no vectors".into()));
    }
    Ok(sup)
}

/// Outcome of checking the per-history reward and prediction inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma6Report {
    pub epsilon: f64,
    pub r_max: f64,
    pub n_histories: usize,
    /// `max |E[r | h, u_ai] − E_μ̂[r | ŝ, b_x, u_ai]|`.
    pub max_reward_gap: f64,
    /// `max TV(P(y', u_h | h, u_ai), P̂(y', u_h | ŝ, b_x, u_ai))`.
    pub max_observation_tv: f64,
    /// Largest action-prediction TV seen on this sample, i.e. the ε this
    /// sample alone would certify.
    pub sample_epsilon: f64,
    pub reward_violations: usize,
    pub observation_violations: usize,
    pub reward_ok: bool,
    pub observation_ok: bool,
}

impl Lemma6Report {
    pub fn passed(&self) -> bool {
        self.reward_ok && self.observation_ok
    }
}

/// Checks, at every history visited by `n_rollouts` uniform-probe rollouts of
/// `rollout_len` steps and for every recommendation, that the reward gap is at
/// most `2·r_max·ε` and that the joint next-observation prediction is within
/// TV `ε`. `r_max` is the largest reward magnitude.
#[allow(clippy::too_many_arguments)]
pub fn check_lemma6<P: HumanPredictor>(
    predictor: &P,
    env: &EnvModel,
    human: &HumanModel,
    epsilon: f64,
    n_rollouts: usize,
    rollout_len: usize,
    seed: u64,
) -> Result<Lemma6Report> {
    let nu = env.n_actions();
    let probe = ProbeStrategy::uniform(nu);
    let r_max = env.reward_magnitude();
    let reward_tol = 2.0 * r_max * epsilon + CHECK_SLACK;
    let tv_tol = epsilon + CHECK_SLACK;

    // per history: (reward gap, observation TV, action TV), maxima over u_ai
    let per_rollout: Vec<Vec<[f64; 3]>> = (0..n_rollouts)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::child_stream(seed, streams::LEMMA6, k as u64);
            let mut out = Vec::with_capacity(rollout_len + 1);
            let mut err = None;
            walk_rollout(predictor, env, human, &probe, rollout_len, &mut r, |view| {
                let mut row = [0.0f64; 3];
                for u_ai in 0..nu {
                    let truth = predict_human_action(view.b_s, u_ai, human);
                    let approx = predictor.predict(view.predictor_state, u_ai);
                    let gap = (expected_reward(view.b_x, &truth, env) - expected_reward(view.b_x, &approx, env)).abs();
                    let p = predict_next(view.b_x, &truth, env);
                    let q = predict_next(view.b_x, &approx, env);
                    let obs_tv = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
                    match tv_distance(&truth, &approx) {
                        Ok(tv) => row[2] = row[2].max(tv),
                        Err(e) => err = Some(e),
                    }
                    row[0] = row[0].max(gap);
                    row[1] = row[1].max(obs_tv);
                }
                out.push(row);
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok(out),
            }
        })
        .collect::<Result<_>>()?;

    let mut report = Lemma6Report {
        epsilon,
        r_max,
        n_histories: 0,
        max_reward_gap: 0.0,
        max_observation_tv: 0.0,
        sample_epsilon: 0.0,
        reward_violations: 0,
        observation_violations: 0,
        reward_ok: true,
        observation_ok: true,
    };
    for [gap, obs_tv, act_tv] in per_rollout.into_iter().flatten() {
        report.n_histories += 1;
        report.max_reward_gap = report.max_reward_gap.max(gap);
        report.max_observation_tv = report.max_observation_tv.max(obs_tv);
        report.sample_epsilon = report.sample_epsilon.max(act_tv);
        if gap > reward_tol {
            report.reward_violations += 1;
        }
        if obs_tv > tv_tol {
            report.observation_violations += 1;
        }
    }
    report.reward_ok = report.reward_violations == 0;
    report.observation_ok = report.observation_violations == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_gives_zero() {
        assert_eq!(optimality_gap_bound(0.0, 1.0, 0.95, 10, 8.0).unwrap(), 0.0);
    }

    #[test]
    fn empty_sum_at_horizon_zero() {
        let b = optimality_gap_bound(0.2, 1.5, 0.9, 0, 100.0).unwrap();
        assert!((b - 4.0 * 0.2 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(optimality_gap_bound(-0.1, 1.0, 0.9, 1, 0.0).is_err());
        assert!(optimality_gap_bound(0.1, 1.0, 1.0, 1, 0.0).is_err());
        assert!(optimality_gap_bound(0.1, 1.0, 0.9, 1, f64::NAN).is_err());
    }

    #[test]
    fn status_labels() {
        let r = GapReport::new(0.1, 1.0, 0.95, 3, 2.0).unwrap();
        assert_eq!(r.status(), "UNMEASURED");
        assert_eq!(r.clone().with_measured_gap(0.0).status(), "CONSISTENT");
        assert_eq!(r.clone().with_measured_gap(r.bound + 1.0).status(), "VIOLATED");
    }
}
