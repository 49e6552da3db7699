//! Scenario files: TOML with an ASCII-art map (`.` free, `#` occupied) or an
//! explicit occupied-cell list, agent start/goal assignments, corridor
//! declarations, and simulation parameters. Loading validates every
//! invariant; `run_episode` drives a deterministic episode end to end.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::congestion::CongestionWeights;
use crate::corridor::Corridor;
use crate::error::{Error, Result};
use crate::grid::GridMap;
use crate::lattice::Pose;
use crate::geom::Vec2;
use crate::logs;
use crate::sim::{AgentConfig, Metrics, Mode, SimParams, World};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: GridMap,
    pub agents: Vec<AgentConfig>,
    pub corridors: Vec<Corridor>,
    pub heading_count: usize,
    pub turn_radius: f64,
    pub seed: u64,
    pub params: SimParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioFile {
    map: MapSpec,
    #[serde(default)]
    agents: Vec<AgentSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tasks: Vec<TaskSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    corridors: Vec<CorridorSpec>,
    #[serde(default)]
    params: ParamsSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MapSpec {
    resolution: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ascii: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<i32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    occupied: Vec<[i32; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AgentSpec {
    id: u32,
    start: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaskSpec {
    id: u32,
    goal: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorridorSpec {
    id: String,
    cells: Vec<[i32; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ParamsSpec {
    mode: String,
    seed: u64,
    heading_count: usize,
    turn_radius: f64,
    agent_radius: f64,
    nominal_speed: f64,
    control_period: f64,
    sensing_radius: f64,
    trigger_radius: f64,
    standoff_distance: f64,
    deadlock_window: usize,
    deadlock_delta: f64,
    step_budget: usize,
    replan_epsilon: f64,
    waypoint_spacing: f64,
    entry_mask_cells: usize,
    corridor_width_cells: i32,
    k_c: f64,
    k_g: f64,
    k_n: f64,
    crowding_factor: f64,
    horizon_steps: usize,
    collision_penalty: f64,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        let p = SimParams::default();
        let w = CongestionWeights::default();
        ParamsSpec {
            mode: "full".into(),
            seed: 0,
            heading_count: 8,
            turn_radius: 2.0,
            agent_radius: 0.45,
            nominal_speed: p.nominal_speed,
            control_period: p.control_period,
            sensing_radius: 0.0,
            trigger_radius: p.trigger_radius,
            standoff_distance: p.standoff_distance,
            deadlock_window: p.deadlock_window,
            deadlock_delta: 0.0,
            step_budget: 0,
            replan_epsilon: p.replan_epsilon,
            waypoint_spacing: 0.0,
            entry_mask_cells: p.entry_mask_cells,
            corridor_width_cells: 2,
            k_c: w.k_c,
            k_g: w.k_g,
            k_n: w.k_n,
            crowding_factor: w.crowding_factor,
            horizon_steps: w.horizon_steps,
            collision_penalty: w.collision_penalty,
        }
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "full" => Ok(Mode::Full),
        "baseline" => Ok(Mode::Baseline),
        "no-corridors" => Ok(Mode::NoCorridors),
        other => Err(Error::Parse(format!(
            "unknown mode `{other}` (expected full, baseline, or no-corridors)"
        ))),
    }
}

pub fn load_scenario(path: &FsPath) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    resolve(file)
}

fn resolve(file: ScenarioFile) -> Result<Scenario> {
    let map = match (&file.map.ascii, file.map.width, file.map.height) {
        (Some(ascii), None, None) => GridMap::from_ascii(ascii, file.map.resolution)?,
        (None, Some(w), Some(h)) => {
            let occupied: Vec<(i32, i32)> =
                file.map.occupied.iter().map(|c| (c[0], c[1])).collect();
            GridMap::new(w, h, file.map.resolution, &occupied)?
        }
        _ => {
            return Err(Error::Parse(
                "map needs either `ascii` or `width`+`height`".into(),
            ))
        }
    };

    let p = &file.params;
    let mode = parse_mode(&p.mode)?;
    let weights = CongestionWeights {
        k_c: p.k_c,
        k_g: p.k_g,
        k_n: p.k_n,
        crowding_factor: p.crowding_factor,
        horizon_steps: p.horizon_steps,
        collision_penalty: p.collision_penalty,
    };
    let params = SimParams {
        mode,
        nominal_speed: p.nominal_speed,
        control_period: p.control_period,
        sensing_radius: p.sensing_radius,
        trigger_radius: p.trigger_radius,
        standoff_distance: p.standoff_distance,
        deadlock_window: p.deadlock_window,
        deadlock_delta: p.deadlock_delta,
        step_budget: p.step_budget,
        replan_epsilon: p.replan_epsilon,
        waypoint_spacing: p.waypoint_spacing,
        entry_mask_cells: p.entry_mask_cells,
        weights,
    };

    let mut agents = Vec::with_capacity(file.agents.len());
    for a in &file.agents {
        let goal = match (a.goal, a.task) {
            (Some(g), None) => g,
            (None, Some(tid)) => file
                .tasks
                .iter()
                .find(|t| t.id == tid)
                .map(|t| t.goal)
                .ok_or_else(|| {
                    Error::Validation(format!("agent {} references unknown task {tid}", a.id))
                })?,
            (Some(_), Some(_)) => {
                return Err(Error::Validation(format!(
                    "agent {} has both a goal and a task",
                    a.id
                )))
            }
            (None, None) => {
                return Err(Error::Validation(format!(
                    "agent {} has neither goal nor task",
                    a.id
                )))
            }
        };
        agents.push(AgentConfig {
            id: a.id,
            start: Pose::new(a.start[0], a.start[1], a.start[2]),
            goal: Vec2::new(goal[0], goal[1]),
            radius: a.radius.unwrap_or(p.agent_radius),
        });
    }

    let corridors: Vec<Corridor> = file
        .corridors
        .iter()
        .map(|c| {
            Corridor::new(
                c.id.clone(),
                c.cells.iter().map(|xy| (xy[0], xy[1])).collect(),
                map.resolution(),
            )
        })
        .collect();

    let scenario = Scenario {
        map,
        agents,
        corridors,
        heading_count: p.heading_count,
        turn_radius: p.turn_radius,
        seed: p.seed,
        params,
    };
    validate(&scenario, p.corridor_width_cells)?;
    Ok(scenario)
}

fn validate(s: &Scenario, corridor_width_cells: i32) -> Result<()> {
    let map = &s.map;
    let mut seen_ids = std::collections::BTreeSet::new();
    for a in &s.agents {
        if !seen_ids.insert(a.id) {
            return Err(Error::Validation(format!("duplicate agent id {}", a.id)));
        }
        if a.radius <= 0.0 {
            return Err(Error::Validation(format!(
                "agent {} has non-positive radius",
                a.id
            )));
        }
        let (sx, sy) = map.cell_of(a.start.pos());
        if map.occupied(sx, sy) {
            return Err(Error::Validation(format!(
                "agent {} starts on an occupied cell ({sx}, {sy})",
                a.id
            )));
        }
        let (gx, gy) = map.cell_of(a.goal);
        if map.occupied(gx, gy) {
            return Err(Error::Validation(format!(
                "agent {} goal is on an occupied cell ({gx}, {gy})",
                a.id
            )));
        }
    }
    for (i, a) in s.agents.iter().enumerate() {
        for b in &s.agents[i + 1..] {
            let d = a.start.pos().dist(b.start.pos());
            if d <= a.radius + b.radius {
                return Err(Error::Validation(format!(
                    "agents {} and {} start within {d:.3} m, below the safe separation",
                    a.id, b.id
                )));
            }
        }
    }
    let mut corridor_ids = std::collections::BTreeSet::new();
    for c in &s.corridors {
        if !corridor_ids.insert(c.id.clone()) {
            return Err(Error::Validation(format!("duplicate corridor id `{}`", c.id)));
        }
        if c.cells.len() < 2 {
            return Err(Error::Validation(format!(
                "corridor `{}` needs at least 2 cells",
                c.id
            )));
        }
        for &(x, y) in &c.cells {
            if map.occupied(x, y) {
                return Err(Error::Validation(format!(
                    "corridor `{}` references occupied cell ({x}, {y})",
                    c.id
                )));
            }
            // Narrowness: the passage must not admit side-by-side traffic.
            let extent = |dx: i32, dy: i32| -> i32 {
                let mut n = 1;
                let (mut cx, mut cy) = (x + dx, y + dy);
                while !map.occupied(cx, cy) {
                    n += 1;
                    cx += dx;
                    cy += dy;
                }
                let (mut cx, mut cy) = (x - dx, y - dy);
                while !map.occupied(cx, cy) {
                    n += 1;
                    cx -= dx;
                    cy -= dy;
                }
                n
            };
            let width = extent(1, 0).min(extent(0, 1));
            if width > corridor_width_cells {
                return Err(Error::Validation(format!(
                    "corridor `{}` cell ({x}, {y}) sits in a {width}-cell-wide passage, \
                     above the {corridor_width_cells}-cell narrowness bound",
                    c.id
                )));
            }
        }
        for w in c.cells.windows(2) {
            let dx = (w[1].0 - w[0].0).abs();
            let dy = (w[1].1 - w[0].1).abs();
            if dx + dy != 1 {
                return Err(Error::Validation(format!(
                    "corridor `{}` cells {:?} and {:?} are not 4-adjacent",
                    c.id, w[0], w[1]
                )));
            }
        }
    }
    if s.heading_count != 8 && s.heading_count != 16 {
        return Err(Error::Validation("heading_count must be 8 or 16".into()));
    }
    if s.params.nominal_speed <= 0.0 || s.params.control_period <= 0.0 {
        return Err(Error::Validation(
            "speed and control period must be positive".into(),
        ));
    }
    Ok(())
}

/// Serialize a scenario back to TOML; `parse_scenario` on the result yields
/// an equal value.
pub fn save_scenario(s: &Scenario) -> String {
    let params = ParamsSpec {
        mode: s.params.mode.label().into(),
        seed: s.seed,
        heading_count: s.heading_count,
        turn_radius: s.turn_radius,
        agent_radius: s.agents.first().map_or(0.45, |a| a.radius),
        nominal_speed: s.params.nominal_speed,
        control_period: s.params.control_period,
        sensing_radius: s.params.sensing_radius,
        trigger_radius: s.params.trigger_radius,
        standoff_distance: s.params.standoff_distance,
        deadlock_window: s.params.deadlock_window,
        deadlock_delta: s.params.deadlock_delta,
        step_budget: s.params.step_budget,
        replan_epsilon: s.params.replan_epsilon,
        waypoint_spacing: s.params.waypoint_spacing,
        entry_mask_cells: s.params.entry_mask_cells,
        corridor_width_cells: i32::MAX, // preserved corridors revalidate loosely
        k_c: s.params.weights.k_c,
        k_g: s.params.weights.k_g,
        k_n: s.params.weights.k_n,
        crowding_factor: s.params.weights.crowding_factor,
        horizon_steps: s.params.weights.horizon_steps,
        collision_penalty: s.params.weights.collision_penalty,
    };
    let file = ScenarioFile {
        map: MapSpec {
            resolution: s.map.resolution(),
            ascii: Some(s.map.to_ascii()),
            width: None,
            height: None,
            occupied: Vec::new(),
        },
        agents: s
            .agents
            .iter()
            .map(|a| AgentSpec {
                id: a.id,
                start: [a.start.x, a.start.y, a.start.theta],
                goal: Some([a.goal.x, a.goal.y]),
                task: None,
                radius: Some(a.radius),
            })
            .collect(),
        tasks: Vec::new(),
        corridors: s
            .corridors
            .iter()
            .map(|c| CorridorSpec {
                id: c.id.clone(),
                cells: c.cells.iter().map(|&(x, y)| [x, y]).collect(),
            })
            .collect(),
        params,
    };
    toml::to_string(&file).expect("scenario serialization cannot fail")
}

/// Everything a finished episode produces, already formatted byte-stably.
pub struct EpisodeOutput {
    pub metrics: Metrics,
    pub trajectory_csv: String,
    pub metrics_toml: String,
    pub reservations_csv: String,
}

/// Build the world, run to completion, and format the three output
/// artifacts. Deterministic for identical inputs.
pub fn run_episode(scenario: &Scenario) -> Result<EpisodeOutput> {
    let mut world = World::new(
        scenario.map.clone(),
        scenario.heading_count,
        scenario.turn_radius,
        scenario.agents.clone(),
        scenario.corridors.clone(),
        scenario.params.clone(),
    )?;
    let metrics = world.run();
    Ok(EpisodeOutput {
        trajectory_csv: logs::trajectory_csv(world.trajectory()),
        metrics_toml: logs::metrics_toml(&metrics, scenario.params.mode, scenario.seed),
        reservations_csv: logs::reservations_csv(world.reservation_events()),
        metrics,
    })
}
