//! CSV emission: `.` decimal separator, header row, fixed column order.

use std::io::{Read, Write};

use crate::ahm::{adherence_init, adherence_step};
use crate::{Error, Result};

use super::episode::{discounted_sum, StepRecord, Trajectory};
use super::experiment::ExperimentReport;

pub const TRAJECTORY_HEADER: [&str; 8] = ["episode", "t", "x", "s", "y", "u_ai", "u_h", "reward"];
pub const REPORT_HEADER: [&str; 6] = ["scenario", "reward_variant", "horizon", "mean", "stderr", "n"];
pub const PLOT_HEADER: [&str; 5] = ["scenario", "reward_variant", "horizon", "episode", "return"];
pub const LOSS_HEADER: [&str; 2] = ["epoch", "loss"];

pub fn write_trajectories<W: Write>(out: W, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for (i, traj) in trajectories.iter().enumerate() {
        for s in &traj.steps {
            w.write_record([
                i.to_string(),
                s.t.to_string(),
                s.x.to_string(),
                s.s.map(|v| v.to_string()).unwrap_or_default(),
                s.y.to_string(),
                s.u_ai.to_string(),
                s.u_h.to_string(),
                s.reward.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads trajectories written by [`write_trajectories`]. Adherence states are
/// recomputed from the raw fields; seeds are not stored and read back as 0.
pub fn read_trajectories<R: Read>(input: R, discount: f64) -> Result<Vec<Trajectory>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(Error::Domain(format!("unexpected trajectory header {headers:?}")));
    }
    let parse = |field: &str, what: &str| -> Result<usize> {
        field
            .parse()
            .map_err(|_| Error::Domain(format!("bad {what} field {field:?}")))
    };
    let mut out: Vec<(usize, Vec<StepRecord>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let episode = parse(&rec[0], "episode")?;
        let step = StepRecord {
            t: parse(&rec[1], "t")?,
            x: parse(&rec[2], "x")?,
            s: if rec[3].is_empty() { None } else { Some(parse(&rec[3], "s")?) },
            y: parse(&rec[4], "y")?,
            u_ai: parse(&rec[5], "u_ai")?,
            u_h: parse(&rec[6], "u_h")?,
            reward: rec[7]
                .parse()
                .map_err(|_| Error::Domain(format!("bad reward field {:?}", &rec[7])))?,
            approx_state: None,
        };
        match out.last_mut() {
            Some((e, steps)) if *e == episode => steps.push(step),
            _ => out.push((episode, vec![step])),
        }
    }
    out.into_iter()
        .map(|(episode, mut steps)| {
            if steps.iter().enumerate().any(|(t, s)| s.t != t) {
                return Err(Error::Domain(format!("episode {episode} steps out of order")));
            }
            let mut a = adherence_init(steps[0].y);
            for i in 0..steps.len() {
                steps[i].approx_state = Some(a.index());
                if let Some(next) = steps.get(i + 1) {
                    a = adherence_step(a, steps[i].u_ai, steps[i].u_h, next.y);
                }
            }
            Ok(Trajectory {
                seed: 0,
                discount,
                discounted_return: discounted_sum(discount, steps.iter().map(|s| s.reward)),
                steps,
            })
        })
        .collect()
}

/// One row per successful scenario cell.
pub fn write_report<W: Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for c in report.cells.iter().filter(|c| c.failure.is_none()) {
        w.write_record([
            c.scenario.to_string(),
            c.variant.to_string(),
            c.horizon.to_string(),
            c.estimate.mean.to_string(),
            c.estimate.stderr.to_string(),
            c.estimate.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-episode discounted returns for external plotting.
pub fn write_plot_data<W: Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER)?;
    for c in report.cells.iter().filter(|c| c.failure.is_none()) {
        for (i, r) in c.returns.iter().enumerate() {
            w.write_record([
                c.scenario.to_string(),
                c.variant.to_string(),
                c.horizon.to_string(),
                i.to_string(),
                r.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_loss_curve<W: Write>(out: W, curve: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOSS_HEADER)?;
    for (i, l) in curve.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
