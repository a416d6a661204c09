use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hairec_core::ahm::{certify_epsilon, train_decoder, Ahm, ProbeStrategy};
use hairec_core::belief::FilterMode;
use hairec_core::bounds::{optimality_gap_bound, v_hat_sup};
use hairec_core::harness::*;
use hairec_core::human::HumanModel;
use hairec_core::pomdp::EnvModel;
use hairec_core::rng::{self, streams};
use hairec_core::solver::{
    solve_ahm, solve_exact_info_state, solve_naive, AhmAgent, ExactAgent, NaiveAgent, PbviConfig, Policy,
};
use serde::Serialize;

use crate::manifest::Recorder;
use crate::{CliError, CliResult, EXIT_IO, EXIT_VALIDATION};

pub const MODEL_FILE: &str = "ahm.json";
pub const LOSS_FILE: &str = "loss_curve.csv";
pub const DATASET_FILE: &str = "dataset.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const PLOT_FILE: &str = "plot_data.csv";
pub const GAP_FILE: &str = "gap_report.json";

pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimKind {
    Ideal,
    Optimal,
    Naive,
    Exact,
}

impl SimKind {
    fn name(self) -> &'static str {
        match self {
            SimKind::Ideal => "ideal",
            SimKind::Optimal => "optimal",
            SimKind::Naive => "naive",
            SimKind::Exact => "exact",
        }
    }
}

fn load_config(opts: &RunOptions) -> CliResult<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&opts.config).map_err(|e| with_path(&opts.config, e))?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(m) = &opts.model {
        config.ahm.model = Some(m.clone());
    }
    config.check()?;
    Ok(config)
}

fn with_path(path: &Path, e: hairec_core::Error) -> CliError {
    let mut err = CliError::from(e);
    err.message = format!("{}: {}", path.display(), err.message);
    err
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_string_pretty(value).expect("serializable").into_bytes()
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> hairec_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Loads the model named by the configuration, or trains and certifies one on
/// the first variant. The loss curve is empty for a loaded model.
fn obtain_ahm(config: &ExperimentConfig, models: &ExperimentModels) -> CliResult<(Ahm, Vec<f64>)> {
    match &config.ahm.model {
        Some(path) => Ok((Ahm::load(path).map_err(|e| with_path(path, e))?, Vec::new())),
        None => Ok(train_and_certify(&models.envs[0].1, &models.human, config)?),
    }
}

fn write_model(rec: &mut Recorder, ahm: &Ahm, loss_curve: &[f64]) -> CliResult<()> {
    if loss_curve.is_empty() {
        return Ok(());
    }
    rec.write(MODEL_FILE, ahm.to_json_string()?.as_bytes())?;
    rec.write(LOSS_FILE, &csv_bytes(|b| write_loss_curve(b, loss_curve))?)
}

// ---------------------------------------------------------------- validate

/// Diagnostics for one file, one line each; empty when valid.
fn check_file(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let value: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return Ok(vec![format!("not valid JSON: {e}")]),
    };
    let has = |key: &str| value.get(key).is_some();
    let lines = |report: hairec_core::pomdp::ValidationReport| {
        report
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.location, v.message))
            .collect()
    };
    let parse_error = |e: hairec_core::Error| vec![e.to_string()];
    if has("transition") {
        Ok(EnvModel::from_json_str(&text).map_or_else(parse_error, |m| lines(m.validate())))
    } else if has("dynamics") {
        Ok(HumanModel::from_json_str(&text).map_or_else(parse_error, |m| lines(m.validate_self())))
    } else if has("predictor") {
        Ok(Ahm::from_json_str(&text).map_or_else(parse_error, |_| Vec::new()))
    } else if has("stages") {
        Ok(Policy::from_json_str(&text).map_or_else(parse_error, |_| Vec::new()))
    } else if has("variants") {
        check_experiment(path)
    } else {
        Ok(vec!["unrecognized file: expected a machine, human, model, policy or experiment file".into()])
    }
}

fn check_experiment(path: &Path) -> CliResult<Vec<String>> {
    let config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) if crate::exit_code(&e) == EXIT_IO => return Err(with_path(path, e)),
        Err(e) => return Ok(vec![e.to_string()]),
    };
    let mut out = Vec::new();
    if let Err(e) = config.check() {
        out.push(e.to_string());
    }
    let mut referenced: Vec<PathBuf> = config.variants.iter().map(|v| v.env.clone()).collect();
    referenced.push(config.human.clone());
    referenced.extend(config.ahm.model.clone());
    for p in &referenced {
        out.extend(check_file(p)?.into_iter().map(|l| format!("{}: {l}", p.display())));
    }
    if out.is_empty() {
        // dimensions agree between the human and every machine
        let models = ExperimentModels::load(&config);
        if let Err(e) = models {
            out.push(e.to_string());
        }
    }
    Ok(out)
}

pub fn validate(paths: &[PathBuf], config: Option<&Path>) -> CliResult<()> {
    let all: Vec<&Path> = paths.iter().map(PathBuf::as_path).chain(config).collect();
    if all.is_empty() {
        return Err(CliError::new(EXIT_VALIDATION, "nothing to validate"));
    }
    let mut failed = 0;
    for p in all {
        let diagnostics = check_file(p)?;
        if diagnostics.is_empty() {
            println!("{}: ok", p.display());
        } else {
            failed += 1;
            for d in diagnostics {
                println!("{}: {d}", p.display());
            }
        }
    }
    if failed > 0 {
        return Err(CliError::new(EXIT_VALIDATION, format!("{failed} file(s) failed validation")));
    }
    Ok(())
}

// ---------------------------------------------------------------- train

pub fn train(opts: &RunOptions, dataset: Option<&Path>, save_dataset: bool) -> CliResult<()> {
    let config = load_config(opts)?;
    let models = ExperimentModels::load(&config)?;
    let mut rec = Recorder::new("train", Some(&opts.config), Some(config.seed), &opts.out)?;
    let env = &models.envs[0].1;
    let a = &config.ahm;

    let data = match dataset {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| CliError::io(path.display(), e))?;
            Dataset {
                n_obs: env.n_obs(),
                n_actions: env.n_actions(),
                trajectories: read_trajectories(file, env.discount).map_err(|e| with_path(path, e))?,
            }
        }
        None => generate_dataset(env, &models.human, a.n_trajectories, a.trajectory_horizon, config.seed)?,
    };
    rec.lap("dataset");
    let (mut ahm, report) = train_decoder(&data.samples(), env.n_obs(), env.n_actions(), &config.train_config())?;
    ahm.training = Some(report.meta);
    rec.lap("train");
    let cert = certify_epsilon(
        &ahm,
        env,
        &models.human,
        &ProbeStrategy::uniform(env.n_actions()),
        a.certify_rollouts,
        a.certify_horizon,
        config.seed,
    )?;
    println!(
        "trained on {} steps: loss {:.6} -> {:.6}, certified epsilon {:.6} over {} histories",
        data.n_steps(),
        report.loss_curve[0],
        report.loss_curve.last().expect("epochs > 0"),
        cert.eps_max,
        cert.n_histories
    );
    ahm.epsilon = Some(cert);
    rec.lap("certify");

    write_model(&mut rec, &ahm, &report.loss_curve)?;
    if save_dataset && dataset.is_none() {
        rec.write(DATASET_FILE, &csv_bytes(|b| write_trajectories(b, &data.trajectories))?)?;
    }
    rec.finish()?;
    Ok(())
}

// ---------------------------------------------------------------- solve

fn pbvi_config(config: &ExperimentConfig) -> PbviConfig {
    PbviConfig {
        expansion_seed: config.seed,
        ..config.solver.pbvi
    }
}

pub fn solve(opts: &RunOptions, exact: bool) -> CliResult<()> {
    let config = load_config(opts)?;
    let models = ExperimentModels::load(&config)?;
    let mut rec = Recorder::new("solve", Some(&opts.config), Some(config.seed), &opts.out)?;
    let (ahm, loss_curve) = obtain_ahm(&config, &models)?;
    write_model(&mut rec, &ahm, &loss_curve)?;
    rec.lap("ahm");
    let t_max = *config.horizons.iter().max().expect("checked nonempty");
    let epsilon = ahm.epsilon.as_ref().map(|c| c.eps_max);

    for (variant, env) in &models.envs {
        let policy = solve_ahm(env, &ahm, t_max, config.solver.backup)?;
        let v_hat = v_hat_sup(&policy)?;
        let bound = epsilon
            .map(|e| optimality_gap_bound(e, env.reward_magnitude(), env.discount, t_max, v_hat))
            .transpose()?;
        println!(
            "{variant}: AHM policy with {} vectors, sup value {v_hat:.4}, gap bound {}",
            policy.n_vectors(),
            bound.map_or("unavailable (no certified epsilon)".into(), |b| format!("{b:.4}"))
        );
        rec.write(&format!("policy_ahm_{variant}.json"), policy.to_json_string()?.as_bytes())?;
        let naive = solve_naive(env, t_max, config.solver.backup)?;
        rec.write(&format!("policy_naive_{variant}.json"), naive.to_json_string()?.as_bytes())?;
        if exact {
            let p = solve_exact_info_state(env, &models.human, t_max, &pbvi_config(&config))?;
            rec.write(&format!("policy_exact_{variant}.json"), p.to_json_string()?.as_bytes())?;
        }
        rec.lap(&format!("solve_{variant}"));
    }
    rec.finish()?;
    Ok(())
}

// ---------------------------------------------------------------- simulate

pub fn simulate(opts: &RunOptions, kinds: &[SimKind], mode: FilterMode) -> CliResult<()> {
    let config = load_config(opts)?;
    let models = ExperimentModels::load(&config)?;
    let mut rec = Recorder::new("simulate", Some(&opts.config), Some(config.seed), &opts.out)?;
    let human = &models.human;
    let needs_ahm = kinds.contains(&SimKind::Optimal);
    let ahm = if needs_ahm {
        let (ahm, loss_curve) = obtain_ahm(&config, &models)?;
        write_model(&mut rec, &ahm, &loss_curve)?;
        Some(ahm)
    } else {
        None
    };
    rec.lap("ahm");
    let t_max = *config.horizons.iter().max().expect("checked nonempty");
    let n = config.n_episodes;

    for (variant, env) in &models.envs {
        let ahm_policy = ahm
            .as_ref()
            .map(|a| solve_ahm(env, a, t_max, config.solver.backup))
            .transpose()?;
        let naive_policy = solve_naive(env, t_max, config.solver.backup)?;
        let exact_policy = kinds
            .contains(&SimKind::Exact)
            .then(|| solve_exact_info_state(env, human, t_max, &pbvi_config(&config)))
            .transpose()?;
        for &h in &config.horizons {
            let seed = rng::derive_seed(config.seed, streams::EPISODES, h as u64);
            for &kind in kinds {
                let trajectories = match kind {
                    SimKind::Ideal => {
                        let p = naive_policy.tail(h)?;
                        run_episodes(env, None, &NaiveAgent::new(&p, env)?, h, n, seed)?
                    }
                    SimKind::Naive => {
                        let p = naive_policy.tail(h)?;
                        run_episodes(env, Some(human), &NaiveAgent::new(&p, env)?, h, n, seed)?
                    }
                    SimKind::Optimal => {
                        let p = ahm_policy.as_ref().expect("solved when requested").tail(h)?;
                        let agent = AhmAgent::new(&p, env, ahm.as_ref().expect("loaded when requested"))?;
                        run_episodes(env, Some(human), &agent, h, n, seed)?
                    }
                    SimKind::Exact => {
                        let p = exact_policy.as_ref().expect("solved when requested").tail(h)?;
                        run_episodes(env, Some(human), &ExactAgent::new(&p, env, human, mode)?, h, n, seed)?
                    }
                };
                let returns: Vec<f64> = trajectories.iter().map(|t| t.discounted_return).collect();
                let est = McEstimate::from_values(&returns);
                println!("{} {variant} T={h}: {:.4} ± {:.4} (n={})", kind.name(), est.mean, est.stderr, est.n);
                rec.write(
                    &format!("trajectories_{}_{variant}_T{h}.csv", kind.name()),
                    &csv_bytes(|b| write_trajectories(b, &trajectories))?,
                )?;
            }
        }
        rec.lap(&format!("simulate_{variant}"));
    }
    rec.finish()?;
    Ok(())
}

// ---------------------------------------------------------------- experiment

#[derive(Serialize)]
struct GapFile<'a> {
    seed: u64,
    epsilon: Option<&'a hairec_core::ahm::EpsilonCertificate>,
    training: Option<&'a hairec_core::ahm::TrainingMeta>,
    gaps: Vec<GapLine<'a>>,
}

#[derive(Serialize)]
struct GapLine<'a> {
    #[serde(flatten)]
    entry: &'a GapEntry,
    status: &'static str,
}

pub fn experiment(opts: &RunOptions) -> CliResult<()> {
    let config = load_config(opts)?;
    let mut rec = Recorder::new("experiment", Some(&opts.config), Some(config.seed), &opts.out)?;
    let models = match ExperimentModels::load(&config) {
        Ok(m) => m,
        Err(e) => {
            rec.fail(format!("load: {e}"));
            rec.finish()?;
            return Err(e.into());
        }
    };
    rec.lap("load");
    let (ahm, loss_curve) = match obtain_ahm(&config, &models) {
        Ok(m) => m,
        Err(e) => {
            rec.fail(format!("ahm: {}", e.message));
            rec.finish()?;
            return Err(e);
        }
    };
    write_model(&mut rec, &ahm, &loss_curve)?;
    rec.lap("ahm");
    let report = match run_experiment_with_model(&config, &models, &ahm, loss_curve) {
        Ok(r) => r,
        Err(e) => {
            rec.fail(format!("pipeline: {e}"));
            rec.finish()?;
            return Err(e.into());
        }
    };
    rec.add_phases(&report.phase_seconds);
    rec.write(REPORT_FILE, &csv_bytes(|b| write_report(b, &report))?)?;
    rec.write(PLOT_FILE, &csv_bytes(|b| write_plot_data(b, &report))?)?;
    let gaps = GapFile {
        seed: report.seed,
        epsilon: report.epsilon.as_ref(),
        training: report.training.as_ref(),
        gaps: report
            .gaps
            .iter()
            .map(|g| GapLine {
                entry: g,
                status: g.report.status(),
            })
            .collect(),
    };
    rec.write(GAP_FILE, &to_json(&gaps))?;
    for f in &report.failures {
        rec.fail(f.clone());
    }
    rec.lap("emit");
    let failed = report.failures.len();
    let manifest = rec.finish()?;
    print!("{}", summarize(&report.cells));
    println!("wrote {} artifacts to {}", manifest.artifacts.len(), opts.out.display());
    if failed > 0 {
        return Err(CliError::new(
            crate::EXIT_NUMERIC,
            format!("{failed} phase failure(s); see {}", opts.out.join(crate::manifest::MANIFEST_FILE).display()),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------- report

/// Per-cell means with paired comparisons between scenarios.
fn summarize(cells: &[CellReport]) -> String {
    let mut by_key: BTreeMap<(String, usize), BTreeMap<String, &[f64]>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.failure.is_none()) {
        by_key
            .entry((c.variant.to_string(), c.horizon))
            .or_default()
            .insert(c.scenario.to_string(), &c.returns);
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8}{:>4}  {:>16}  {:>16}  {:>16}  {:>22}  {:>22}\n",
        "variant", "T", "ideal", "optimal", "naive", "optimal-naive (lb95)", "ideal-optimal (lb95)"
    ));
    for ((variant, h), scen) in &by_key {
        let cell = |name: &str| {
            scen.get(name).map_or("-".to_string(), |r| {
                let e = McEstimate::from_values(r);
                format!("{:.4}±{:.4}", e.mean, e.stderr)
            })
        };
        let diff = |a: &str, b: &str| match (scen.get(a), scen.get(b)) {
            (Some(x), Some(y)) => McEstimate::paired_difference(x, y).map_or("-".into(), |d| {
                format!("{:+.4} ({:+.4})", d.mean, d.lower_bound(Z_95_ONE_SIDED))
            }),
            _ => "-".into(),
        };
        out.push_str(&format!(
            "{variant:<8}{h:>4}  {:>16}  {:>16}  {:>16}  {:>22}  {:>22}\n",
            cell("ideal"),
            cell("optimal"),
            cell("naive"),
            diff("optimal", "naive"),
            diff("ideal", "optimal"),
        ));
    }
    out
}

pub fn report(out: &Path) -> CliResult<()> {
    let plot_path = out.join(PLOT_FILE);
    let file = fs::File::open(&plot_path).map_err(|e| CliError::io(plot_path.display(), e))?;
    let mut returns: BTreeMap<(String, String, usize), Vec<f64>> = BTreeMap::new();
    let mut rdr = csv_reader(file);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::new(EXIT_VALIDATION, format!("{}: {e}", plot_path.display())))?;
        let bad = || CliError::new(EXIT_VALIDATION, format!("{}: malformed row {rec:?}", plot_path.display()));
        let h: usize = rec[2].parse().map_err(|_| bad())?;
        let r: f64 = rec[4].parse().map_err(|_| bad())?;
        returns.entry((rec[0].to_string(), rec[1].to_string(), h)).or_default().push(r);
    }
    let cells: Vec<CellReport> = returns
        .into_iter()
        .map(|((s, v, h), r)| {
            let bad = |what: String| CliError::new(EXIT_VALIDATION, format!("{}: {what}", plot_path.display()));
            Ok(CellReport {
                scenario: s.parse().map_err(bad)?,
                variant: v.parse().map_err(bad)?,
                horizon: h,
                estimate: McEstimate::from_values(&r),
                returns: r,
                failure: None,
            })
        })
        .collect::<CliResult<_>>()?;
    print!("{}", summarize(&cells));

    let gap_path = out.join(GAP_FILE);
    if let Ok(text) = fs::read_to_string(&gap_path) {
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::new(EXIT_VALIDATION, format!("{}: {e}", gap_path.display())))?;
        if let Some(eps) = v.pointer("/epsilon/eps_max").and_then(|e| e.as_f64()) {
            println!("certified epsilon {eps:.6}");
        }
        for g in v["gaps"].as_array().into_iter().flatten() {
            let r = &g["report"];
            println!(
                "gap {} T={}: bound {:.4}, measured {}, {}",
                g["variant"].as_str().unwrap_or("?"),
                r["horizon"],
                r["bound"].as_f64().unwrap_or(f64::NAN),
                r["measured_gap"].as_f64().map_or("-".into(), |m| format!("{m:.3e}")),
                g["status"].as_str().unwrap_or("?"),
            );
        }
    }
    Ok(())
}

fn csv_reader(file: fs::File) -> csv::Reader<fs::File> {
    csv::Reader::from_reader(file)
}
