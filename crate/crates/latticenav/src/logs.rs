//! Byte-stable text formats for episode artifacts. Floats are written with
//! fixed six-digit precision so identical runs produce identical files.

use std::fmt::Write as _;

use crate::corridor::ReservationEvent;
use crate::error::{Error, Result};
use crate::sim::{AgentStatus, Metrics, Mode, TrajRecord};

/// `step,agent,x,y,theta,status` rows, contiguous per agent until the agent
/// reaches a terminal status.
pub fn trajectory_csv(records: &[TrajRecord]) -> String {
    let mut out = String::from("step,agent,x,y,theta,status\n");
    for r in records {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{}",
            r.step,
            r.agent,
            r.x,
            r.y,
            r.theta,
            r.status.label()
        )
        .unwrap();
    }
    out
}

/// Parse a trajectory log back into records (used by the render command).
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("step,agent,x,y,theta,status") => {}
        other => {
            return Err(Error::Parse(format!(
                "bad trajectory header: {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!(
                "trajectory line {}: expected 6 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("trajectory line {}: bad {what}", i + 2)))
        };
        let status = match fields[5] {
            "active" => AgentStatus::Active,
            "reached" => AgentStatus::Reached,
            "collided" => AgentStatus::Collided,
            "deadlocked" => AgentStatus::Deadlocked,
            other => {
                return Err(Error::Parse(format!(
                    "trajectory line {}: unknown status `{other}`",
                    i + 2
                )))
            }
        };
        records.push(TrajRecord {
            step: fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("trajectory line {}: bad step", i + 2)))?,
            agent: fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("trajectory line {}: bad agent", i + 2)))?,
            x: parse_f(fields[2], "x")?,
            y: parse_f(fields[3], "y")?,
            theta: parse_f(fields[4], "theta")?,
            status,
        });
    }
    Ok(records)
}

/// Metrics document: episode summary plus one block per agent.
pub fn metrics_toml(metrics: &Metrics, mode: Mode, seed: u64) -> String {
    let mut out = String::new();
    writeln!(out, "[episode]").unwrap();
    writeln!(out, "mode = \"{}\"", mode.label()).unwrap();
    writeln!(out, "seed = {seed}").unwrap();
    writeln!(out, "steps = {}", metrics.steps).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "[metrics]").unwrap();
    writeln!(out, "agents = {}", metrics.agents).unwrap();
    writeln!(out, "reached = {}", metrics.reached).unwrap();
    writeln!(out, "collided = {}", metrics.collided).unwrap();
    writeln!(out, "deadlocked = {}", metrics.deadlocked).unwrap();
    writeln!(out, "success_rate = {:.6}", metrics.success_rate).unwrap();
    writeln!(out, "collided_fraction = {:.6}", metrics.collided_fraction).unwrap();
    writeln!(out, "deadlocked_fraction = {:.6}", metrics.deadlocked_fraction).unwrap();
    writeln!(out, "avg_path_length = {:.6}", metrics.avg_path_length).unwrap();
    for (id, status, traveled) in &metrics.per_agent {
        writeln!(out).unwrap();
        writeln!(out, "[[agent]]").unwrap();
        writeln!(out, "id = {id}").unwrap();
        writeln!(out, "status = \"{}\"", status.label()).unwrap();
        writeln!(out, "traveled = {traveled:.6}").unwrap();
    }
    out
}

/// `time,agent,corridor,direction,decision,window_start,window_end` rows.
pub fn reservations_csv(events: &[ReservationEvent]) -> String {
    let mut out = String::from("time,agent,corridor,direction,decision,window_start,window_end\n");
    for e in events {
        writeln!(
            out,
            "{:.6},{},{},{},{},{:.6},{:.6}",
            e.time,
            e.agent,
            e.corridor,
            e.direction.label(),
            e.decision.label(),
            e.window.0,
            e.window.1
        )
        .unwrap();
    }
    out
}
