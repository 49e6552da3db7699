//! Static SVG renders of maps, trajectories, and Voronoi cells. Output is
//! deterministic (fixed palette, fixed precision) for golden-file tests.

use std::fmt::Write as _;

use crate::bvc::BufferedVoronoiCell;
use crate::corridor::Corridor;
use crate::geom::Vec2;
use crate::grid::GridMap;
use crate::sim::TrajRecord;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const SCALE: f64 = 32.0;

pub struct RenderInput<'a> {
    pub map: &'a GridMap,
    pub trajectories: &'a [TrajRecord],
    pub corridors: &'a [Corridor],
    /// Optional cells to overlay (owner position plus polygon).
    pub cells: &'a [BufferedVoronoiCell],
    /// Disk radius used for start markers.
    pub agent_radius: f64,
}

pub fn render_svg(input: &RenderInput) -> String {
    let map = input.map;
    let w = map.width() as f64 * map.resolution();
    let h = map.height() as f64 * map.resolution();
    let px = |v: f64| v * SCALE;
    // World y grows upward; SVG y grows downward.
    let fy = |y: f64| px(h - y);

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">",
        px(w),
        px(h),
        px(w),
        px(h)
    )
    .unwrap();
    writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{:.0}\" height=\"{:.0}\" fill=\"#ffffff\"/>",
        px(w),
        px(h)
    )
    .unwrap();

    for c in input.corridors {
        for &(x, y) in &c.cells {
            let r = map.cell_rect(x, y);
            writeln!(
                out,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#fff3cd\"/>",
                px(r.min.x),
                fy(r.max.y),
                px(r.max.x - r.min.x),
                px(r.max.y - r.min.y)
            )
            .unwrap();
        }
    }

    for (x, y) in map.occupied_cells() {
        let r = map.cell_rect(x, y);
        writeln!(
            out,
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#37474f\"/>",
            px(r.min.x),
            fy(r.max.y),
            px(r.max.x - r.min.x),
            px(r.max.y - r.min.y)
        )
        .unwrap();
    }

    for cell in input.cells {
        let poly = cell.polygon(Vec2::new(0.0, 0.0), Vec2::new(w, h));
        if poly.is_empty() {
            continue;
        }
        let pts: Vec<String> = poly
            .iter()
            .map(|p| format!("{:.3},{:.3}", px(p.x), fy(p.y)))
            .collect();
        writeln!(
            out,
            "<polygon points=\"{}\" fill=\"#a5d6a7\" fill-opacity=\"0.35\" stroke=\"#2e7d32\" stroke-width=\"1\"/>",
            pts.join(" ")
        )
        .unwrap();
    }

    // Group trajectory points by agent, in first-appearance order.
    let mut agents: Vec<u32> = Vec::new();
    for r in input.trajectories {
        if !agents.contains(&r.agent) {
            agents.push(r.agent);
        }
    }
    for (k, id) in agents.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<&TrajRecord> = input
            .trajectories
            .iter()
            .filter(|r| r.agent == *id)
            .collect();
        if pts.is_empty() {
            continue;
        }
        if pts.len() > 1 {
            let poly: Vec<String> = pts
                .iter()
                .map(|r| format!("{:.3},{:.3}", px(r.x), fy(r.y)))
                .collect();
            writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
                poly.join(" "),
                color
            )
            .unwrap();
        }
        let first = pts[0];
        let last = pts[pts.len() - 1];
        writeln!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"{}\" fill-opacity=\"0.55\"/>",
            px(first.x),
            fy(first.y),
            px(input.agent_radius),
            color
        )
        .unwrap();
        writeln!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
            px(last.x),
            fy(last.y),
            px(input.agent_radius),
            color
        )
        .unwrap();
    }

    writeln!(out, "</svg>").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AgentStatus;

    #[test]
    fn map_only_render_has_obstacles_and_no_polylines() {
        let map = GridMap::new(4, 3, 1.0, &[(1, 1)]).unwrap();
        let svg = render_svg(&RenderInput {
            map: &map,
            trajectories: &[],
            corridors: &[],
            cells: &[],
            agent_radius: 0.45,
        });
        assert!(svg.contains("<rect"));
        assert!(!svg.contains("<polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn straight_path_polyline_endpoints() {
        let map = GridMap::new(6, 3, 1.0, &[]).unwrap();
        let records = vec![
            TrajRecord { step: 0, agent: 0, x: 0.5, y: 1.5, theta: 0.0, status: AgentStatus::Active },
            TrajRecord { step: 1, agent: 0, x: 5.5, y: 1.5, theta: 0.0, status: AgentStatus::Reached },
        ];
        let svg = render_svg(&RenderInput {
            map: &map,
            trajectories: &records,
            corridors: &[],
            cells: &[],
            agent_radius: 0.45,
        });
        // 0.5 m -> 16 px, y flip: 3 - 1.5 = 1.5 -> 48 px.
        assert!(svg.contains("<polyline points=\"16.000,48.000 176.000,48.000\""), "{svg}");
    }

    #[test]
    fn render_is_deterministic() {
        let map = GridMap::new(5, 5, 1.0, &[(2, 2)]).unwrap();
        let input = RenderInput {
            map: &map,
            trajectories: &[],
            corridors: &[],
            cells: &[],
            agent_radius: 0.4,
        };
        assert_eq!(render_svg(&input), render_svg(&input));
    }
}
