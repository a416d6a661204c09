//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hairec_core::belief::{info_state_step, initial_info_state, FilterMode, HistoryRecord, InfoState, JointFilter};
use hairec_core::human::HumanModel;
use hairec_core::pomdp::{Distribution, EnvModel};

/// A feasible history with its joint posterior and factored filter states.
pub struct Visited {
    pub history: HistoryRecord,
    pub joint: Distribution,
    pub bayes: InfoState,
    pub literal: InfoState,
}

/// Depth-first enumeration of every history of positive probability up to
/// length `max_t`, for every recommendation sequence.
pub fn for_each_feasible_history(
    env: &EnvModel,
    human: &HumanModel,
    max_t: usize,
    mut visit: impl FnMut(&Visited),
) {
    let filter = JointFilter::new(env, human).unwrap();
    for y0 in 0..env.n_obs() {
        let Ok(joint) = filter.initial(y0) else { continue };
        let bayes = initial_info_state(env, human, y0).unwrap();
        let node = Visited {
            history: HistoryRecord::new(y0),
            joint,
            literal: bayes.clone(),
            bayes,
        };
        recurse(env, human, &filter, max_t, node, &mut visit);
    }
}

fn recurse(
    env: &EnvModel,
    human: &HumanModel,
    filter: &JointFilter,
    max_t: usize,
    node: Visited,
    visit: &mut impl FnMut(&Visited),
) {
    visit(&node);
    if node.history.t() == max_t {
        return;
    }
    let nu = env.n_actions();
    for a in 0..nu {
        for u_h in 0..nu {
            for y in 0..env.n_obs() {
                let w = filter.step_weights(node.joint.probs(), a, u_h, y);
                let Some(joint) = Distribution::from_weights(w) else { continue };
                let bayes = info_state_step(&node.bayes, a, u_h, y, env, human, FilterMode::Bayes).unwrap();
                let literal = info_state_step(&node.literal, a, u_h, y, env, human, FilterMode::PaperLiteral)
                    .unwrap_or_else(|_| node.literal.clone());
                let mut history = node.history.clone();
                history.push(a, u_h, y);
                recurse(
                    env,
                    human,
                    filter,
                    max_t,
                    Visited {
                        history,
                        joint,
                        bayes,
                        literal,
                    },
                    visit,
                );
            }
        }
    }
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Marginals of a joint belief indexed `x·|S| + s`.
pub fn marginals(joint: &[f64], nx: usize, ns: usize) -> (Vec<f64>, Vec<f64>) {
    let mut bx = vec![0.0; nx];
    let mut bs = vec![0.0; ns];
    for x in 0..nx {
        for s in 0..ns {
            bx[x] += joint[x * ns + s];
            bs[s] += joint[x * ns + s];
        }
    }
    (bx, bs)
}

/// Plain finite-horizon POMDP over `X` by explicit belief-tree enumeration,
/// written without any library filter: `V_t(b) = max_u Σ_x b(x) r(x,u) +
/// γ Σ_y P(y|b,u) V_{t+1}(b'_{u,y})`.
pub fn textbook_pomdp_value(env: &EnvModel, b: &[f64], t: usize, horizon: usize) -> f64 {
    let (nx, nu, ny) = (env.reward.len(), env.reward[0].len(), env.observation[0].len());
    let mut best = f64::NEG_INFINITY;
    for u in 0..nu {
        let mut q: f64 = (0..nx).map(|x| b[x] * env.reward[x][u]).sum();
        if t < horizon {
            for y in 0..ny {
                let mut w = vec![0.0; nx];
                for x in 0..nx {
                    for x2 in 0..nx {
                        w[x2] += b[x] * env.transition[u][x][x2] * env.observation[x2][y];
                    }
                }
                let p: f64 = w.iter().sum();
                if p > 0.0 {
                    let next: Vec<f64> = w.iter().map(|v| v / p).collect();
                    q += env.discount * p * textbook_pomdp_value(env, &next, t + 1, horizon);
                }
            }
        }
        best = best.max(q);
    }
    best
}

/// Prior-predictive posterior `P(x_0 | y_0)` without library code.
pub fn first_posterior(env: &EnvModel, y0: usize) -> Option<(f64, Vec<f64>)> {
    let prior = env.initial.clone().unwrap_or_else(|| vec![1.0 / env.transition[0].len() as f64; env.transition[0].len()]);
    let w: Vec<f64> = prior.iter().enumerate().map(|(x, p)| p * env.observation[x][y0]).collect();
    let z: f64 = w.iter().sum();
    (z > 0.0).then(|| (z, w.iter().map(|v| v / z).collect()))
}

/// Finite-horizon MDP value iteration over fully observed states.
/// Returns `(V_0, argmax_0)` per state with lowest-index tie breaking.
pub fn mdp_value_iteration(env: &EnvModel, horizon: usize) -> (Vec<f64>, Vec<usize>) {
    let (nx, nu) = (env.transition[0].len(), env.reward[0].len());
    let mut v = vec![0.0; nx];
    let mut act = vec![0; nx];
    for t in (0..=horizon).rev() {
        let mut nv = vec![0.0; nx];
        for x in 0..nx {
            let mut best = f64::NEG_INFINITY;
            for u in 0..nu {
                let mut q = env.reward[x][u];
                if t < horizon {
                    q += env.discount * (0..nx).map(|x2| env.transition[u][x][x2] * v[x2]).sum::<f64>();
                }
                if q > best + 1e-12 {
                    best = q;
                    act[x] = u;
                }
            }
            nv[x] = best;
        }
        v = nv;
    }
    (v, act)
}

/// `Σ_{t=1}^T γ^t` by explicit looping.
pub fn loop_geometric(gamma: f64, horizon: usize) -> f64 {
    let mut total = 0.0;
    let mut g = 1.0;
    for _ in 1..=horizon {
        g *= gamma;
        total += g;
    }
    total
}

fn random_row<R: rand::Rng>(r: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if r.gen::<f64>() < sparsity { 0.0 } else { r.gen::<f64>() })
            .collect();
        let z: f64 = w.iter().sum();
        if z > 0.0 {
            return w.iter().map(|v| v / z).collect();
        }
    }
}

/// Random environment with strictly positive observation rows.
pub fn random_env<R: rand::Rng>(r: &mut R, nx: usize, nu: usize, ny: usize) -> EnvModel {
    let reward: Vec<Vec<f64>> = (0..nx).map(|_| (0..nu).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    EnvModel {
        states: (0..nx).map(|i| format!("x{i}")).collect(),
        actions: (0..nu).map(|i| format!("u{i}")).collect(),
        observations: (0..ny).map(|i| format!("y{i}")).collect(),
        initial: Some(random_row(r, nx, 0.0)),
        transition: (0..nu).map(|_| (0..nx).map(|_| random_row(r, nx, 0.3)).collect()).collect(),
        observation: (0..nx).map(|_| random_row(r, ny, 0.0)).collect(),
        reward,
        discount: 0.9,
        horizon: 3,
        r_min: -1.0,
        r_max: 1.0,
    }
}

pub fn random_human<R: rand::Rng>(r: &mut R, ns: usize, nu: usize, ny: usize) -> HumanModel {
    HumanModel {
        internal_states: Vec::new(),
        initial: random_row(r, ns, 0.0),
        policy: (0..ns).map(|_| (0..nu).map(|_| random_row(r, nu, 0.4)).collect()).collect(),
        dynamics: (0..ns)
            .map(|_| (0..nu).map(|_| (0..ny).map(|_| random_row(r, ns, 0.3)).collect()).collect())
            .collect(),
    }
}

/// Table rows for an AHM over `4·|Y|` states with at most `support` nonzero
/// entries per row.
pub fn random_table<R: rand::Rng>(r: &mut R, n_obs: usize, nu: usize, support: usize) -> Vec<Vec<f64>> {
    (0..4 * n_obs * nu)
        .map(|_| {
            let mut w = vec![0.0; nu];
            for _ in 0..support {
                w[r.gen_range(0..nu)] += r.gen::<f64>() + 0.05;
            }
            let z: f64 = w.iter().sum();
            w.iter().map(|v| v / z).collect()
        })
        .collect()
}

pub fn random_simplex<R: rand::Rng>(r: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -r.gen::<f64>().max(1e-300).ln()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}
