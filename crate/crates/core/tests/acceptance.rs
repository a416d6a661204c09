//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use common::{for_each_feasible_history, marginals, tv};
use hairec_core::ahm::{train_decoder, Ahm, Mlp, TrainConfig};
use hairec_core::belief::initial_info_state;
use hairec_core::bounds::{check_lemma6, v_hat_sup, GapReport};
use hairec_core::harness::*;
use hairec_core::human::{lazy_operator, lazy_operator_with_initial, HumanModel};
use hairec_core::rng;
use hairec_core::solver::{
    evaluate_policy_exact, history_dp_oracle, solve_ahm, solve_exact_info_state, BackupMode, PbviConfig,
};
use rand::Rng;

const SEED: u64 = 20_240_917;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed.as_secs_f64() < limit_secs as f64
}

fn filter_oracle() -> Outcome {
    let start = Instant::now();
    let env = machine_default(RewardVariant::R1);
    let human = lazy_operator(2);
    let (mut n, mut worst_tv, mut worst_fact) = (0usize, 0.0f64, 0.0f64);
    for_each_feasible_history(&env, &human, 4, |v| {
        let (bx, bs) = marginals(v.joint.probs(), 3, 2);
        worst_tv = worst_tv.max(tv(&bx, v.bayes.b_x.probs())).max(tv(&bs, v.bayes.b_s.probs()));
        for x in 0..3 {
            for s in 0..2 {
                worst_fact = worst_fact.max((v.joint.get(x * 2 + s) - bx[x] * bs[s]).abs());
            }
        }
        n += 1;
    });
    let elapsed = start.elapsed();
    outcome(
        worst_tv <= 1e-9 && worst_fact <= 1e-9 && within(elapsed, 30),
        format!("{n} histories, max TV {worst_tv:.2e}, max factorization error {worst_fact:.2e}, {elapsed:.1?}"),
    )
}

fn dp_equivalence() -> Outcome {
    let start = Instant::now();
    let env = machine_default(RewardVariant::R1);
    let human = lazy_operator(2);
    let mut worst = 0.0f64;
    for horizon in [1, 2] {
        let oracle = history_dp_oracle(&env, &human, horizon).unwrap();
        let cfg = PbviConfig {
            exhaustive_depth: horizon,
            ..Default::default()
        };
        let policy = solve_exact_info_state(&env, &human, horizon, &cfg).unwrap();
        let p_y0 = env.initial_distribution().probs().iter().enumerate().fold(vec![0.0; 2], |mut acc, (x, p)| {
            for (y, q) in env.observation_row(x).iter().enumerate() {
                acc[y] += p * q;
            }
            acc
        });
        let mut v0 = 0.0;
        for y0 in 0..env.n_obs() {
            if let Some(o) = oracle.by_first_obs[y0] {
                let pi = initial_info_state(&env, &human, y0).unwrap();
                let v = policy.value(0, 0, &pi.product()).unwrap();
                worst = worst.max((v - o).abs());
                v0 += p_y0[y0] * v;
            }
        }
        worst = worst.max((v0 - oracle.value).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && within(elapsed, 60),
        format!("max |V_pbvi - V_history| {worst:.2e} for T in {{1,2}}, {elapsed:.1?}"),
    )
}

fn gradient_check() -> Outcome {
    let mut r = rng::stream(SEED);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let net = Mlp::decoder(8, 4, SEED + trial);
        let x: Vec<f64> = (0..8).map(|_| r.gen_range(-1.0..1.0)).collect();
        let target = r.gen_range(0..4);
        let (_, g) = net.gradient(&x, target).unwrap();
        let base = net.params();
        let mut probe = net.clone();
        for (k, &analytic) in g.values.iter().enumerate() {
            let mut p = base.clone();
            p[k] = base[k] + h;
            probe.set_params(&p);
            let plus = probe.loss(&x, target).unwrap();
            p[k] = base[k] - h;
            probe.set_params(&p);
            let minus = probe.loss(&x, target).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max((fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-6));
        }
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over 100 triples"))
}

fn training_sanity() -> Outcome {
    let start = Instant::now();
    let env = machine_default(RewardVariant::R1);
    let human = HumanModel::fully_adherent(4, 2);
    let data = generate_dataset(&env, &human, 10_000, 50, SEED).unwrap();
    let samples = data.samples();
    let cfg = TrainConfig {
        learning_rate: 1e-4,
        seed: SEED,
        ..Default::default()
    };
    let (ahm, report) = train_decoder(&samples, 2, 4, &cfg).unwrap();
    let first = report.loss_curve[0];
    let last = *report.loss_curve.last().unwrap();
    let reachable: BTreeSet<(usize, usize)> = samples.iter().map(|s| (s.state.index(), s.u_ai)).collect();
    let min_mass = reachable
        .iter()
        .map(|&(s, u)| ahm.predict_state(&hairec_core::ahm::AdherenceState::from_index(s), u).get(u))
        .fold(1.0f64, f64::min);
    let elapsed = start.elapsed();
    outcome(
        last < first && min_mass >= 0.95 && within(elapsed, 15 * 60),
        format!(
            "NLL {first:.4} -> {last:.4}, min adherent mass {min_mass:.4} over {} reachable cells, {elapsed:.1?}",
            reachable.len()
        ),
    )
}

fn lemma6_consistency(ahm: &Ahm) -> Outcome {
    let env = machine_default(RewardVariant::R1);
    let human = lazy_operator(2);
    let cert = ahm.epsilon.as_ref().unwrap();
    // 50 fresh rollouts of 19 steps visit 1,000 histories
    let fresh = check_lemma6(ahm, &env, &human, cert.eps_max, 50, 19, SEED ^ 0x5eed).unwrap();
    let violations = fresh.reward_violations + fresh.observation_violations;
    let retest = check_lemma6(ahm, &env, &human, cert.eps_max.max(fresh.sample_epsilon), 50, 19, SEED ^ 0x5eed).unwrap();
    let retest_violations = retest.reward_violations + retest.observation_violations;
    outcome(
        cert.n_histories >= 1_000
            && fresh.n_histories == 1_000
            && violations as f64 <= 0.01 * fresh.n_histories as f64
            && retest_violations == 0,
        format!(
            "certified eps {:.4} on {} histories; fresh {}: reward gap {:.4} <= {:.4}, obs TV {:.4}, violations {violations}, re-test {retest_violations}",
            cert.eps_max,
            cert.n_histories,
            fresh.n_histories,
            fresh.max_reward_gap,
            2.0 * fresh.r_max * cert.eps_max,
            fresh.max_observation_tv,
        ),
    )
}

fn gap_bound(ahm: &Ahm) -> Outcome {
    let human = lazy_operator(2);
    let eps = ahm.epsilon.as_ref().unwrap().eps_max;
    let horizon = 3;
    let mut pass = true;
    let mut parts = Vec::new();
    for variant in RewardVariant::ALL {
        let env = machine_default(variant);
        let optimum = history_dp_oracle(&env, &human, horizon).unwrap().value;
        let policy = solve_ahm(&env, ahm, horizon, BackupMode::default()).unwrap();
        let achieved = evaluate_policy_exact(&policy, &env, Some(&human), Some(ahm), horizon).unwrap();
        let report = GapReport::new(eps, env.reward_magnitude(), env.discount, horizon, v_hat_sup(&policy).unwrap())
            .unwrap()
            .with_measured_gap(optimum - achieved);
        pass &= report.consistent() == Some(true);
        parts.push(format!("{variant} gap {:.2e} <= {:.4}", optimum - achieved, report.bound));
    }
    outcome(pass, format!("T=3: {}", parts.join(", ")))
}

fn experiment_config() -> ExperimentConfig {
    ExperimentConfig {
        variants: RewardVariant::ALL
            .iter()
            .map(|&variant| VariantEnv {
                variant,
                env: format!("machine_{variant}.json").into(),
            })
            .collect(),
        human: "lazy_operator.json".into(),
        horizons: vec![10, 20],
        n_episodes: 1_000,
        seed: SEED,
        solver: SolverSettings::default(),
        ahm: AhmSettings::default(),
    }
}

fn experiment_models() -> ExperimentModels {
    ExperimentModels {
        envs: RewardVariant::ALL.iter().map(|&v| (v, machine_default(v))).collect(),
        human: lazy_operator(2),
    }
}

fn experiment_ordering(report: &ExperimentReport, elapsed: Duration) -> Outcome {
    let mut pass = report.failures.is_empty() && within(elapsed, 10 * 60);
    let mut parts = Vec::new();
    for variant in RewardVariant::ALL {
        for horizon in [10, 20] {
            let get = |s| &report.cell(s, variant, horizon).unwrap().returns;
            let (ideal, optimal, naive) = (get(Scenario::Ideal), get(Scenario::Optimal), get(Scenario::Naive));
            let m = |v: &[f64]| McEstimate::from_values(v);
            pass &= optimal.len() >= 100 && m(ideal).mean >= m(optimal).mean;
            let diff = McEstimate::paired_difference(optimal, naive).unwrap();
            if variant == RewardVariant::R3 {
                let pooled = ((m(optimal).stderr.powi(2) + m(naive).stderr.powi(2)) * optimal.len() as f64 / 2.0).sqrt();
                let effect = diff.mean.abs() / pooled;
                pass &= effect <= 0.5;
                parts.push(format!("{variant} T={horizon} effect size {effect:.3}"));
            } else {
                let lb = diff.lower_bound(Z_95_ONE_SIDED);
                pass &= lb > 0.0;
                parts.push(format!("{variant} T={horizon} opt-naive lb {lb:.3}"));
            }
            parts.push(format!("ideal-opt {:.3}", m(ideal).mean - m(optimal).mean));
        }
    }
    outcome(pass, format!("{} episodes/cell, {}, {elapsed:.1?}", report.cells[0].returns.len(), parts.join(" ")))
}

fn artifacts(report: &ExperimentReport) -> Vec<Vec<u8>> {
    let mut a = Vec::new();
    write_report(&mut a, report).unwrap();
    let mut b = Vec::new();
    write_plot_data(&mut b, report).unwrap();
    let mut c = Vec::new();
    write_loss_curve(&mut c, &report.loss_curve).unwrap();
    vec![a, b, c]
}

/// Max TV against the oracle for (bayes, paper_literal) and between the two
/// internal-state beliefs, over an evenly spaced subsample of 1,000 histories.
fn filter_mode_divergence(human: &HumanModel) -> (f64, f64, f64) {
    let env = machine_default(RewardVariant::R1);
    let mut all = Vec::new();
    for_each_feasible_history(&env, human, 4, |v| {
        let (bx, bs) = marginals(v.joint.probs(), 3, 2);
        let bayes = tv(&bx, v.bayes.b_x.probs()).max(tv(&bs, v.bayes.b_s.probs()));
        let literal = tv(&bx, v.literal.b_x.probs()).max(tv(&bs, v.literal.b_s.probs()));
        let between = tv(v.bayes.b_s.probs(), v.literal.b_s.probs());
        all.push((bayes, literal, between));
    });
    let picked: Vec<_> = (0..1_000).map(|i| all[i * all.len() / 1_000]).collect();
    let max = |f: fn(&(f64, f64, f64)) -> f64| picked.iter().map(f).fold(0.0, f64::max);
    (max(|p| p.0), max(|p| p.1), max(|p| p.2))
}

fn filter_modes() -> Outcome {
    // Started in a known state, the lazy operator's internal state is a
    // deterministic function of the recommendations, so both updates agree.
    let (b_known, l_known, _) = filter_mode_divergence(&lazy_operator(2));
    let (bayes, literal, between) = filter_mode_divergence(&lazy_operator_with_initial(2, vec![0.5, 0.5]));
    outcome(
        b_known <= 1e-9 && bayes <= 1e-9 && literal > 0.0,
        format!(
            "1000 histories, uncertain start: bayes max TV {bayes:.2e}, paper_literal max TV {literal:.4}, \
             bayes/literal divergence {between:.4}; known start: bayes {b_known:.2e}, paper_literal {l_known:.2e}"
        ),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "filter matches joint oracle", filter_oracle()));
    results.push((2, "info-state DP equals history DP", dp_equivalence()));
    results.push((3, "analytic gradient", gradient_check()));
    results.push((4, "training sanity", training_sanity()));

    let config = experiment_config();
    let models = experiment_models();
    let start = Instant::now();
    let first = run_experiment_with(&config, &models).unwrap();
    let elapsed = start.elapsed();
    let second = run_experiment_with(&config, &models).unwrap();
    let (ahm, _) = train_and_certify(&models.envs[0].1, &models.human, &config).unwrap();
    assert_eq!(ahm.epsilon, first.epsilon);

    results.push((5, "approximation certificate", lemma6_consistency(&ahm)));
    results.push((6, "optimality gap bound", gap_bound(&ahm)));
    results.push((7, "experiment ordering", experiment_ordering(&first, elapsed)));
    let same = artifacts(&first) == artifacts(&second);
    results.push((8, "determinism", outcome(same, "report, plot and loss CSVs byte-identical".into())));
    results.push((9, "filter mode comparison", filter_modes()));

    // written past the test harness's output capture so the summary always shows
    let mut stdout = std::io::stdout().lock();
    for (id, name, o) in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        writeln!(stdout, "criterion {id}: {status} {name}: {}", o.detail).unwrap();
    }
    drop(stdout);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
