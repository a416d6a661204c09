//! Closed-loop simulation, exploratory datasets and the three-scenario
//! comparison on the machine replacement instance.

mod csvio;
mod dataset;
mod episode;
mod experiment;
pub mod machine;

pub use csvio::{
    read_trajectories, write_loss_curve, write_plot_data, write_report, write_trajectories, LOSS_HEADER, PLOT_HEADER,
    REPORT_HEADER, TRAJECTORY_HEADER,
};
pub use dataset::{generate_dataset, Dataset};
pub use episode::{evaluate_agent_mc, run_episodes, simulate_episode, McEstimate, StepRecord, Trajectory, Z_95_ONE_SIDED};
pub use experiment::{
    run_experiment, run_experiment_with, run_experiment_with_model, train_and_certify, AhmSettings, CellReport, ExperimentConfig,
    ExperimentModels, ExperimentReport, GapEntry, Scenario, SolverSettings, VariantEnv,
};
pub use machine::{machine_default, RewardVariant};
