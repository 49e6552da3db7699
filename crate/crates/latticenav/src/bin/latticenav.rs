//! Command-line runner: validate scenarios, run deterministic episodes,
//! render trajectories to SVG, and dump motion-primitive sets.
//!
//! Exit codes: 0 = episode finished with success rate 1.0 (or command
//! succeeded), 1 = episode finished with anomalies, 2 = input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use latticenav::bvc::compute_bvc;
use latticenav::error::Error;
use latticenav::geom::Vec2;
use latticenav::lattice::{build_primitives, serialize_primitives};
use latticenav::logs;
use latticenav::render::{render_svg, RenderInput};
use latticenav::scenario::{load_scenario, parse_mode, run_episode};

#[derive(Parser)]
#[command(name = "latticenav", version, about = "Multi-agent lattice navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write trajectory, metrics, and reservation logs.
    Run {
        scenario: PathBuf,
        /// Output directory for trajectory.csv, metrics.toml, reservations.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed (recorded in outputs; the pipeline
        /// itself is deterministic).
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario mode: full, baseline, or no-corridors.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Parse and validate a scenario file.
    Validate { scenario: PathBuf },
    /// Render a trajectory log over its scenario map as an SVG.
    Render {
        trajectory: PathBuf,
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overlay each agent's buffered Voronoi cell at this step.
        #[arg(long)]
        cells_step: Option<usize>,
    },
    /// Print the motion primitive set for a heading count.
    GenPrimitives {
        #[arg(long, default_value_t = 8)]
        headings: usize,
        #[arg(long, default_value_t = 2.0)]
        turn_radius: f64,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { scenario, out, seed, mode } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            if let Some(mode) = mode {
                sc.params.mode = parse_mode(&mode)?;
            }
            let episode = run_episode(&sc)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("trajectory.csv"), &episode.trajectory_csv)?;
            std::fs::write(out.join("metrics.toml"), &episode.metrics_toml)?;
            std::fs::write(out.join("reservations.csv"), &episode.reservations_csv)?;
            let m = &episode.metrics;
            println!(
                "mode={} agents={} reached={} collided={} deadlocked={} SR={:.3} steps={} avg_len={:.2}",
                sc.params.mode.label(),
                m.agents,
                m.reached,
                m.collided,
                m.deadlocked,
                m.success_rate,
                m.steps,
                m.avg_path_length
            );
            Ok(if m.success_rate >= 1.0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Validate { scenario } => {
            let sc = load_scenario(&scenario)?;
            println!(
                "ok: {}x{} map, {} agents, {} corridors, mode={}",
                sc.map.width(),
                sc.map.height(),
                sc.agents.len(),
                sc.corridors.len(),
                sc.params.mode.label()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Render { trajectory, scenario, out, cells_step } => {
            let sc = load_scenario(&scenario)?;
            let text = std::fs::read_to_string(&trajectory)?;
            let records = logs::parse_trajectory_csv(&text)?;
            let radius = sc.agents.first().map_or(0.45, |a| a.radius);
            let cells = match cells_step {
                Some(step) => {
                    let at: Vec<(u32, Vec2)> = records
                        .iter()
                        .filter(|r| r.step == step)
                        .map(|r| (r.agent, Vec2::new(r.x, r.y)))
                        .collect();
                    at.iter()
                        .map(|&(id, pos)| {
                            let others: Vec<Vec2> = at
                                .iter()
                                .filter(|&&(oid, _)| oid != id)
                                .map(|&(_, p)| p)
                                .collect();
                            compute_bvc(pos, radius, &others)
                        })
                        .collect()
                }
                None => Vec::new(),
            };
            let svg = render_svg(&RenderInput {
                map: &sc.map,
                trajectories: &records,
                corridors: &sc.corridors,
                cells: &cells,
                agent_radius: radius,
            });
            std::fs::write(&out, svg)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenPrimitives { headings, turn_radius, resolution, out } => {
            let prims = build_primitives(headings, turn_radius, resolution)?;
            let text = serialize_primitives(&prims, headings, turn_radius, resolution);
            match out {
                Some(path) => {
                    std::fs::write(&path, text)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
