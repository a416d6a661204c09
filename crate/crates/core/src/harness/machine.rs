//! Default machine replacement instance.
//!
//! These numbers are a plausible stand-in chosen for this crate; they are not
//! measured or published values. States count failures `{0, 1, 2}`, actions
//! are `{produce, inspect, small repair, major repair}` and the binary
//! observation is output quality `{bad, good}`.
//!
//! Dynamics:
//! - produce / inspect: stay w.p. 0.8, one more failure w.p. 0.2 (2 absorbs);
//! - small repair: from x ≥ 1 one fewer failure w.p. 0.9, else stay;
//! - major repair: back to 0.
//!
//! Observation: `P(good | x) = (0.9, 0.5, 0.1)`.
//!
//! Rewards are charged on the implemented action:
//! - `R1`: produce pays `(1.0, 0.5, 0.0)` by state, inspect −0.1, small
//!   repair −0.3, major repair −0.7;
//! - `R2`: `R1` with small repair −1.0;
//! - `R3`: `R1` with small repair −1.0, major repair −1.5 and +0.05 on
//!   produce and inspect.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pomdp::EnvModel;

pub const PRODUCE: usize = 0;
pub const INSPECT: usize = 1;
pub const SMALL_REPAIR: usize = 2;
pub const MAJOR_REPAIR: usize = 3;

pub const DISCOUNT: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RewardVariant {
    R1,
    R2,
    R3,
}

impl RewardVariant {
    pub const ALL: [RewardVariant; 3] = [RewardVariant::R1, RewardVariant::R2, RewardVariant::R3];
}

impl fmt::Display for RewardVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RewardVariant::R1 => "R1",
            RewardVariant::R2 => "R2",
            RewardVariant::R3 => "R3",
        };
        f.write_str(s)
    }
}

impl FromStr for RewardVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "R1" | "r1" => Ok(RewardVariant::R1),
            "R2" | "r2" => Ok(RewardVariant::R2),
            "R3" | "r3" => Ok(RewardVariant::R3),
            other => Err(format!("unknown reward variant {other:?}")),
        }
    }
}

fn reward_table(variant: RewardVariant) -> Vec<Vec<f64>> {
    let produce = [1.0, 0.5, 0.0];
    let (inspect, small, major, bonus) = match variant {
        RewardVariant::R1 => (-0.1, -0.3, -0.7, 0.0),
        RewardVariant::R2 => (-0.1, -1.0, -0.7, 0.0),
        RewardVariant::R3 => (-0.1, -1.0, -1.5, 0.05),
    };
    produce
        .iter()
        .map(|&p| vec![p + bonus, inspect + bonus, small, major])
        .collect()
}

/// The shipped machine model for one reward variant, starting from a new
/// machine (`x_0 = 0`).
pub fn machine_default(variant: RewardVariant) -> EnvModel {
    let wear = vec![
        vec![0.8, 0.2, 0.0],
        vec![0.0, 0.8, 0.2],
        vec![0.0, 0.0, 1.0],
    ];
    let small_repair = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.9, 0.1, 0.0],
        vec![0.0, 0.9, 0.1],
    ];
    let major_repair = vec![vec![1.0, 0.0, 0.0]; 3];
    let reward = reward_table(variant);
    let r_min = reward.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let r_max = reward.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    EnvModel {
        states: vec!["0 failures".into(), "1 failure".into(), "2 failures".into()],
        actions: vec![
            "produce".into(),
            "inspect".into(),
            "small repair".into(),
            "major repair".into(),
        ],
        observations: vec!["bad".into(), "good".into()],
        initial: Some(vec![1.0, 0.0, 0.0]),
        transition: vec![wear.clone(), wear, small_repair, major_repair],
        observation: vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.9, 0.1]],
        reward,
        discount: DISCOUNT,
        horizon: 10,
        r_min,
        r_max,
    }
}
