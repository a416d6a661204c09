use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ahm::{certify_epsilon, train_decoder, Ahm, EpsilonCertificate, ProbeStrategy, TrainConfig, TrainingMeta};
use crate::belief::FilterMode;
use crate::bounds::{v_hat_sup, GapReport};
use crate::human::HumanModel;
use crate::pomdp::EnvModel;
use crate::rng::{self, streams};
use crate::solver::{
    evaluate_agent_exact, solve_ahm, solve_exact_info_state, solve_naive, AhmAgent, BackupMode, ExactAgent,
    NaiveAgent, PbviConfig, Policy, EXACT_EVAL_MAX_T,
};
use crate::{Error, Result};

use super::dataset::generate_dataset;
use super::episode::{run_episodes, McEstimate};
use super::machine::RewardVariant;

/// Who acts and on what policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// No human; every recommendation of the adherence-assuming policy is
    /// implemented.
    Ideal,
    /// The human in the loop, recommendations from the AHM policy.
    Optimal,
    /// The human in the loop, recommendations from the adherence-assuming
    /// policy.
    Naive,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Ideal, Scenario::Optimal, Scenario::Naive];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Ideal => "ideal",
            Scenario::Optimal => "optimal",
            Scenario::Naive => "naive",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ideal" => Ok(Scenario::Ideal),
            "optimal" => Ok(Scenario::Optimal),
            "naive" => Ok(Scenario::Naive),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantEnv {
    pub variant: RewardVariant,
    pub env: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Backups for the AHM and adherence-assuming solvers.
    pub backup: BackupMode,
    pub pbvi: PbviConfig,
    /// Horizon of the small instance on which the gap is measured with the
    /// exact-human reference; skipped when above the exact-evaluation limit.
    pub gap_horizon: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            backup: BackupMode::Grid { resolution: 30 },
            pbvi: PbviConfig::default(),
            gap_horizon: Some(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AhmSettings {
    /// Trained model to load instead of training.
    pub model: Option<PathBuf>,
    pub n_trajectories: usize,
    pub trajectory_horizon: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub certify_rollouts: usize,
    pub certify_horizon: usize,
}

impl Default for AhmSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            model: None,
            n_trajectories: 10_000,
            trajectory_horizon: 50,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            certify_rollouts: 1_000,
            certify_horizon: 20,
        }
    }
}

/// Paths are resolved against the configuration file's directory by
/// [`ExperimentConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub variants: Vec<VariantEnv>,
    pub human: PathBuf,
    pub horizons: Vec<usize>,
    pub n_episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub ahm: AhmSettings,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for v in &mut cfg.variants {
            resolve(&mut v.env);
        }
        resolve(&mut cfg.human);
        if let Some(m) = cfg.ahm.model.as_mut() {
            resolve(m);
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_episodes == 0 {
            return Err(Error::Domain("n_episodes must be at least 1".into()));
        }
        if self.variants.is_empty() || self.horizons.is_empty() {
            return Err(Error::Domain("need at least one variant and one horizon".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.ahm.learning_rate,
            epochs: self.ahm.epochs,
            batch_size: self.ahm.batch_size,
            seed: self.seed,
        }
    }
}

/// Loaded and validated models for an experiment.
#[derive(Debug, Clone)]
pub struct ExperimentModels {
    pub envs: Vec<(RewardVariant, EnvModel)>,
    pub human: HumanModel,
}

impl ExperimentModels {
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let human = HumanModel::load(&config.human)?;
        let mut envs = Vec::new();
        for v in &config.variants {
            let env = EnvModel::load(&v.env)?;
            env.validate().into_result()?;
            human.validate(env.n_actions(), env.n_obs()).into_result()?;
            envs.push((v.variant, env));
        }
        Ok(Self { envs, human })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario: Scenario,
    pub variant: RewardVariant,
    pub horizon: usize,
    pub estimate: McEstimate,
    pub returns: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub variant: RewardVariant,
    pub report: GapReport,
    /// Reference value for `J(g*)` from the exact-human solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_value: Option<f64>,
    /// Exact expected return of the AHM policy with the true human.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ahm_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub cells: Vec<CellReport>,
    pub gaps: Vec<GapEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingMeta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_curve: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonCertificate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    /// Wall-clock seconds per phase; not part of any CSV artifact.
    #[serde(default)]
    pub phase_seconds: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn cell(&self, scenario: Scenario, variant: RewardVariant, horizon: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.variant == variant && c.horizon == horizon)
    }
}

/// Trains the AHM on an exploratory dataset and certifies its ε.
pub fn train_and_certify(
    env: &EnvModel,
    human: &HumanModel,
    config: &ExperimentConfig,
) -> Result<(Ahm, Vec<f64>)> {
    let a = &config.ahm;
    let data = generate_dataset(env, human, a.n_trajectories, a.trajectory_horizon, config.seed)?;
    let (mut ahm, report) = train_decoder(&data.samples(), env.n_obs(), env.n_actions(), &config.train_config())?;
    ahm.training = Some(report.meta);
    let cert = certify_epsilon(
        &ahm,
        env,
        human,
        &ProbeStrategy::uniform(env.n_actions()),
        a.certify_rollouts,
        a.certify_horizon,
        config.seed,
    )?;
    ahm.epsilon = Some(cert);
    Ok((ahm, report.loss_curve))
}

/// Runs the three scenarios for every reward variant and horizon.
///
/// Phases: obtain the AHM (load or train and certify), solve the AHM and
/// adherence-assuming policies per variant at the largest horizon, simulate
/// every cell, attach gap reports. Episode seeds depend only on the master
/// seed and the horizon, so all scenarios of a horizon share their random
/// streams. A failing variant is recorded and the remaining ones still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.check()?;
    let models = ExperimentModels::load(config)?;
    run_experiment_with(config, &models)
}

pub fn run_experiment_with(config: &ExperimentConfig, models: &ExperimentModels) -> Result<ExperimentReport> {
    config.check()?;
    let clock = Instant::now();
    let (_, first_env) = models.envs.first().ok_or_else(|| Error::Domain("no variants".into()))?;
    let (ahm, loss_curve) = match &config.ahm.model {
        Some(path) => (Ahm::load(path)?, Vec::new()),
        None => train_and_certify(first_env, &models.human, config)?,
    };
    let ahm_seconds = clock.elapsed().as_secs_f64();
    let mut report = run_experiment_with_model(config, models, &ahm, loss_curve)?;
    report.phase_seconds.insert("ahm".into(), ahm_seconds);
    Ok(report)
}

/// As [`run_experiment_with`], with the AHM already at hand. `loss_curve` is
/// copied into the report.
pub fn run_experiment_with_model(
    config: &ExperimentConfig,
    models: &ExperimentModels,
    ahm: &Ahm,
    loss_curve: Vec<f64>,
) -> Result<ExperimentReport> {
    config.check()?;
    let mut phase_seconds = BTreeMap::new();
    let clock = Instant::now();
    let human = &models.human;
    let epsilon = ahm.epsilon.as_ref().map(|c| c.eps_max);

    let t_max = *config.horizons.iter().max().expect("checked nonempty");
    let mut cells = Vec::new();
    let mut gaps = Vec::new();
    let mut failures = Vec::new();
    for (variant, env) in &models.envs {
        let solved = solve_ahm(env, ahm, t_max, config.solver.backup)
            .and_then(|a| Ok((a, solve_naive(env, t_max, config.solver.backup)?)));
        let (ahm_policy, naive_policy) = match solved {
            Ok(p) => p,
            Err(e) => {
                let msg = format!("{variant}: solve failed: {e}");
                for &h in &config.horizons {
                    for s in Scenario::ALL {
                        cells.push(failed_cell(s, *variant, h, &msg));
                    }
                }
                failures.push(msg);
                continue;
            }
        };
        for &h in &config.horizons {
            let seed = rng::derive_seed(config.seed, streams::EPISODES, h as u64);
            let (ahm_policy, naive_policy) = match ahm_policy.tail(h).and_then(|a| Ok((a, naive_policy.tail(h)?))) {
                Ok(p) => p,
                Err(e) => {
                    let msg = format!("{variant} T={h}: {e}");
                    for s in Scenario::ALL {
                        cells.push(failed_cell(s, *variant, h, &msg));
                    }
                    failures.push(msg);
                    continue;
                }
            };
            for s in Scenario::ALL {
                let run = match s {
                    Scenario::Ideal => NaiveAgent::new(&naive_policy, env)
                        .and_then(|a| run_episodes(env, None, &a, h, config.n_episodes, seed)),
                    Scenario::Optimal => AhmAgent::new(&ahm_policy, env, ahm)
                        .and_then(|a| run_episodes(env, Some(human), &a, h, config.n_episodes, seed)),
                    Scenario::Naive => NaiveAgent::new(&naive_policy, env)
                        .and_then(|a| run_episodes(env, Some(human), &a, h, config.n_episodes, seed)),
                };
                match run {
                    Ok(trajs) => {
                        let returns: Vec<f64> = trajs.iter().map(|t| t.discounted_return).collect();
                        cells.push(CellReport {
                            scenario: s,
                            variant: *variant,
                            horizon: h,
                            estimate: McEstimate::from_values(&returns),
                            returns,
                            failure: None,
                        });
                    }
                    Err(e) => {
                        let msg = format!("{variant} {s} T={h}: {e}");
                        cells.push(failed_cell(s, *variant, h, &msg));
                        failures.push(msg);
                    }
                }
            }
        }
        if let Some(eps) = epsilon {
            match gap_entries(env, human, ahm, &ahm_policy, *variant, eps, config) {
                Ok(mut g) => gaps.append(&mut g),
                Err(e) => failures.push(format!("{variant}: gap report failed: {e}")),
            }
        }
    }
    phase_seconds.insert("solve_and_simulate".into(), clock.elapsed().as_secs_f64());

    Ok(ExperimentReport {
        seed: config.seed,
        cells,
        gaps,
        training: ahm.training.clone(),
        loss_curve,
        epsilon: ahm.epsilon.clone(),
        failures,
        phase_seconds,
    })
}

fn failed_cell(scenario: Scenario, variant: RewardVariant, horizon: usize, msg: &str) -> CellReport {
    CellReport {
        scenario,
        variant,
        horizon,
        estimate: McEstimate::from_values(&[]),
        returns: Vec::new(),
        failure: Some(msg.to_string()),
    }
}

/// Unmeasured reports for every experiment horizon, plus a measured one on
/// the small gap horizon where both values can be computed exactly.
fn gap_entries(
    env: &EnvModel,
    human: &HumanModel,
    ahm: &Ahm,
    ahm_policy: &Policy,
    variant: RewardVariant,
    epsilon: f64,
    config: &ExperimentConfig,
) -> Result<Vec<GapEntry>> {
    let r_max = env.reward_magnitude();
    let v_hat = v_hat_sup(ahm_policy)?;
    let mut out = Vec::new();
    for &h in &config.horizons {
        out.push(GapEntry {
            variant,
            report: GapReport::new(epsilon, r_max, env.discount, h, v_hat)?,
            reference_value: None,
            ahm_value: None,
        });
    }
    if let Some(h) = config.solver.gap_horizon.filter(|&h| h <= EXACT_EVAL_MAX_T) {
        let small = solve_ahm(env, ahm, h, config.solver.backup)?;
        let pbvi = PbviConfig {
            expansion_seed: config.seed,
            ..config.solver.pbvi
        };
        let exact = solve_exact_info_state(env, human, h, &pbvi)?;
        let reference = evaluate_agent_exact(&ExactAgent::new(&exact, env, human, FilterMode::Bayes)?, env, Some(human), h)?;
        let achieved = evaluate_agent_exact(&AhmAgent::new(&small, env, ahm)?, env, Some(human), h)?;
        out.push(GapEntry {
            variant,
            report: GapReport::new(epsilon, r_max, env.discount, h, v_hat_sup(&small)?)?.with_measured_gap(reference - achieved),
            reference_value: Some(reference),
            ahm_value: Some(achieved),
        });
    }
    Ok(out)
}
