//! State lattice: discretized poses (cell centers x uniform headings) as
//! nodes, precomputed unicycle motion primitives as edges, filtered against
//! the static map with an exact swept-disk clearance check.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{seg_rect_dist, Vec2};
use crate::grid::GridMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// One edge template of the lattice graph, expressed in a frame anchored at
/// the center of the start cell. The sweep is sampled at most half a cell
/// apart and begins/ends exactly on lattice poses.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPrimitive {
    pub start_heading: usize,
    pub end_heading: usize,
    pub offset: (i32, i32),
    pub cost: f64,
    pub sweep: Vec<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeNode {
    pub x: i32,
    pub y: i32,
    pub heading: usize,
}

pub type NodeId = u32;

#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub to: NodeId,
    pub prim: u32,
    pub cost: f64,
}

pub fn heading_angle(heading: usize, heading_count: usize) -> f64 {
    heading as f64 * TAU / heading_count as f64
}

fn unit(theta: f64) -> Vec2 {
    Vec2::new(theta.cos(), theta.sin())
}

fn bezier(p: [Vec2; 4], t: f64) -> Vec2 {
    let s = 1.0 - t;
    p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t) + p[3] * (t * t * t)
}

fn bezier_deriv(p: [Vec2; 4], t: f64) -> Vec2 {
    let s = 1.0 - t;
    (p[1] - p[0]) * (3.0 * s * s) + (p[2] - p[1]) * (6.0 * s * t) + (p[3] - p[2]) * (3.0 * t * t)
}

/// Sample a cubic with tangents aligned to the boundary headings, resampled
/// to roughly uniform spacing `<= max_gap`, endpoints pinned exactly.
fn sample_curve(
    end: Vec2,
    theta0: f64,
    theta1: f64,
    max_gap: f64,
) -> (Vec<Pose>, f64) {
    let chord = end.norm();
    let k = chord / 3.0;
    let ctrl = [
        Vec2::new(0.0, 0.0),
        unit(theta0) * k,
        end - unit(theta1) * k,
        end,
    ];
    // Fine polyline for arc length.
    const FINE: usize = 256;
    let mut pts = Vec::with_capacity(FINE + 1);
    let mut cum = Vec::with_capacity(FINE + 1);
    let mut total = 0.0;
    for i in 0..=FINE {
        let t = i as f64 / FINE as f64;
        let p = bezier(ctrl, t);
        if i > 0 {
            total += p.dist(pts[i - 1]);
        }
        pts.push(p);
        cum.push(total);
    }
    let segments = (total / max_gap).ceil().max(1.0) as usize;
    let mut sweep = Vec::with_capacity(segments + 1);
    sweep.push(Pose::new(0.0, 0.0, theta0));
    let mut j = 0;
    for s in 1..segments {
        let target = total * s as f64 / segments as f64;
        while j + 1 < cum.len() && cum[j + 1] < target {
            j += 1;
        }
        let span = cum[j + 1] - cum[j];
        let frac = if span > 0.0 { (target - cum[j]) / span } else { 0.0 };
        let t = (j as f64 + frac) / FINE as f64;
        let p = bezier(ctrl, t);
        let d = bezier_deriv(ctrl, t);
        sweep.push(Pose::new(p.x, p.y, crate::geom::wrap_angle(d.angle())));
    }
    sweep.push(Pose::new(end.x, end.y, crate::geom::wrap_angle(theta1)));
    (sweep, total)
}

fn polyline_len(sweep: &[Pose]) -> f64 {
    sweep
        .windows(2)
        .map(|w| w[0].pos().dist(w[1].pos()))
        .sum()
}

/// Integer offsets within a Chebyshev distance of 3 cells, shortest first.
fn offset_candidates() -> Vec<(i32, i32)> {
    let mut cands = Vec::new();
    for dx in -3i32..=3 {
        for dy in -3i32..=3 {
            if dx != 0 || dy != 0 {
                cands.push((dx, dy));
            }
        }
    }
    cands.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dx, dy));
    cands
}

/// Build the per-heading primitive set: one forward step, one left and one
/// right turn (each changing heading by one step), and in-place rotations.
///
/// Turn targets are the shortest cell offsets whose chord direction lies
/// strictly between the boundary headings and whose implied circular-arc
/// radius is at least `turn_radius`; if no offset within 3 cells qualifies
/// the parameters are rejected.
pub fn build_primitives(
    heading_count: usize,
    turn_radius: f64,
    resolution: f64,
) -> Result<Vec<MotionPrimitive>> {
    if heading_count != 8 && heading_count != 16 {
        return Err(Error::InvalidParameter(format!(
            "heading count must be 8 or 16, got {heading_count}"
        )));
    }
    if resolution <= 0.0 {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    if turn_radius < resolution {
        return Err(Error::InvalidParameter(
            "turn radius must be at least one cell".into(),
        ));
    }
    let h = heading_count;
    let step = TAU / h as f64;
    let half_step = step / 2.0;
    let max_gap = resolution / 2.0;
    let cands = offset_candidates();
    let rotation_cost = 0.5 * resolution;

    let mut prims = Vec::with_capacity(h * 5);
    for heading in 0..h {
        let theta0 = heading_angle(heading, h);

        // Forward: shortest offset within half a heading step of the axis.
        let fwd = cands
            .iter()
            .copied()
            .find(|&(dx, dy)| {
                let dir = (dy as f64).atan2(dx as f64);
                crate::geom::angle_diff(theta0, dir).abs() < half_step - 1e-9
            })
            .ok_or_else(|| {
                Error::InvalidParameter(format!("no forward offset for heading {heading}"))
            })?;
        let end = Vec2::new(fwd.0 as f64 * resolution, fwd.1 as f64 * resolution);
        let aligned = crate::geom::angle_diff(theta0, end.angle()).abs() < 1e-12;
        let (sweep, cost) = if aligned {
            let chord = end.norm();
            let n = (chord / max_gap).ceil().max(1.0) as usize;
            let mut sweep = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let p = end * (i as f64 / n as f64);
                sweep.push(Pose::new(p.x, p.y, theta0));
            }
            (sweep, chord)
        } else {
            let (sweep, _) = sample_curve(end, theta0, theta0, max_gap);
            let len = polyline_len(&sweep);
            (sweep, len)
        };
        prims.push(MotionPrimitive {
            start_heading: heading,
            end_heading: heading,
            offset: fwd,
            cost,
            sweep,
        });

        // Turns: +1 step (left) then -1 step (right).
        for turn in [1i32, -1] {
            let end_heading = (heading as i32 + turn).rem_euclid(h as i32) as usize;
            let theta1 = heading_angle(end_heading, h);
            let chosen = cands.iter().copied().find(|&(dx, dy)| {
                let dir = (dy as f64).atan2(dx as f64);
                let from_start = crate::geom::angle_diff(theta0, dir);
                let inside = if turn > 0 {
                    from_start > 1e-9 && from_start < step - 1e-9
                } else {
                    from_start < -1e-9 && from_start > -step + 1e-9
                };
                if !inside {
                    return false;
                }
                let chord = ((dx * dx + dy * dy) as f64).sqrt() * resolution;
                let implied_radius = chord / (2.0 * (half_step).sin());
                implied_radius + 1e-9 >= turn_radius
            });
            let (dx, dy) = chosen.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "turn radius {turn_radius} cannot reach the adjacent heading within 3 cells"
                ))
            })?;
            let end = Vec2::new(dx as f64 * resolution, dy as f64 * resolution);
            let (sweep, _) = sample_curve(end, theta0, theta1, max_gap);
            let cost = polyline_len(&sweep);
            prims.push(MotionPrimitive {
                start_heading: heading,
                end_heading,
                offset: (dx, dy),
                cost,
                sweep,
            });
        }

        // In-place rotations.
        for turn in [1i32, -1] {
            let end_heading = (heading as i32 + turn).rem_euclid(h as i32) as usize;
            let theta1 = heading_angle(end_heading, h);
            let mid = crate::geom::wrap_angle(theta0 + turn as f64 * half_step);
            prims.push(MotionPrimitive {
                start_heading: heading,
                end_heading,
                offset: (0, 0),
                cost: rotation_cost,
                sweep: vec![
                    Pose::new(0.0, 0.0, theta0),
                    Pose::new(0.0, 0.0, mid),
                    Pose::new(0.0, 0.0, crate::geom::wrap_angle(theta1)),
                ],
            });
        }
    }
    Ok(prims)
}

/// Text form of a primitive set, one record per primitive, suitable for
/// golden-file comparison.
pub fn serialize_primitives(
    prims: &[MotionPrimitive],
    heading_count: usize,
    turn_radius: f64,
    resolution: f64,
) -> String {
    let mut out = String::new();
    writeln!(out, "headings {heading_count}").unwrap();
    writeln!(out, "resolution {resolution:.6}").unwrap();
    writeln!(out, "turn_radius {turn_radius:.6}").unwrap();
    for p in prims {
        writeln!(
            out,
            "prim start={} end={} dx={} dy={} cost={:.6} sweep={}",
            p.start_heading,
            p.end_heading,
            p.offset.0,
            p.offset.1,
            p.cost,
            p.sweep.len()
        )
        .unwrap();
        for s in &p.sweep {
            writeln!(out, "  {:.6} {:.6} {:.6}", s.x, s.y, s.theta).unwrap();
        }
    }
    out
}

/// True iff the agent disk of `radius`, swept along the primitive placed at
/// `node`, stays clear of all occupied cells and inside the map. Consecutive
/// sweep samples are treated as straight segments and checked exactly
/// against cell rectangles.
pub fn placed_sweep_collision_free(
    prim: &MotionPrimitive,
    node: (i32, i32),
    map: &GridMap,
    radius: f64,
) -> bool {
    let origin = map.cell_center(node.0, node.1);
    sweep_segments_clear(prim, origin, map, radius, None)
}

fn sweep_segments_clear(
    prim: &MotionPrimitive,
    origin: Vec2,
    map: &GridMap,
    radius: f64,
    center_dist: Option<&[f64]>,
) -> bool {
    let res = map.resolution();
    let half_diag = res * std::f64::consts::SQRT_2 / 2.0;
    let mut prev = origin + prim.sweep[0].pos();
    if !segment_clear(prev, prev, map, radius, res, half_diag, center_dist) {
        return false;
    }
    for s in &prim.sweep[1..] {
        let cur = origin + s.pos();
        if !segment_clear(prev, cur, map, radius, res, half_diag, center_dist) {
            return false;
        }
        prev = cur;
    }
    true
}

fn segment_clear(
    a: Vec2,
    b: Vec2,
    map: &GridMap,
    radius: f64,
    res: f64,
    half_diag: f64,
    center_dist: Option<&[f64]>,
) -> bool {
    // Border distance is concave along the segment: endpoint checks suffice.
    if map.dist_to_border(a) < radius || map.dist_to_border(b) < radius {
        return false;
    }
    let seg_len = a.dist(b);
    if let Some(dist) = center_dist {
        // Conservative accept from the precomputed center-to-center field.
        let (cx, cy) = map.cell_of(a);
        if map.in_bounds(cx, cy) {
            let lb = dist[(cy * map.width() + cx) as usize]
                - a.dist(map.cell_center(cx, cy))
                - half_diag;
            if lb >= radius + seg_len {
                return true;
            }
        }
    }
    let pad = radius + res;
    let lo = Vec2::new(a.x.min(b.x) - pad, a.y.min(b.y) - pad);
    let hi = Vec2::new(a.x.max(b.x) + pad, a.y.max(b.y) + pad);
    let (x0, y0) = map.cell_of(lo);
    let (x1, y1) = map.cell_of(hi);
    for y in y0.max(0)..=y1.min(map.height() - 1) {
        for x in x0.max(0)..=x1.min(map.width() - 1) {
            if map.occupied(x, y) && seg_rect_dist(a, b, &map.cell_rect(x, y)) < radius {
                return false;
            }
        }
    }
    true
}

/// Immutable search graph: map, agent radius, primitives, and precomputed
/// edge lists. Safe to share read-only across per-agent planners.
#[derive(Debug)]
pub struct Lattice {
    map: GridMap,
    radius: f64,
    heading_count: usize,
    prims: Vec<MotionPrimitive>,
    cell_free: Vec<bool>,
    succ: Vec<Vec<Edge>>,
    /// Admissibility scale for the 2-D grid heuristic: min over moving
    /// primitives of cost / (8-connected length of the cells its sweep
    /// visits). See `planner::HeuristicTable`.
    grid_heuristic_scale: f64,
}

impl Lattice {
    pub fn build(
        map: GridMap,
        radius: f64,
        heading_count: usize,
        turn_radius: f64,
    ) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::InvalidParameter("agent radius must be positive".into()));
        }
        let prims = build_primitives(heading_count, turn_radius, map.resolution())?;
        let grid_heuristic_scale = grid_heuristic_scale(&prims, map.resolution());
        let center_dist = map.center_obstacle_dist();
        let ncells = (map.width() * map.height()) as usize;
        let mut cell_free = vec![false; ncells];
        for y in 0..map.height() {
            for x in 0..map.width() {
                if !map.occupied(x, y) {
                    let c = map.cell_center(x, y);
                    cell_free[(y * map.width() + x) as usize] =
                        map.clearance(c, radius + map.resolution()) >= radius;
                }
            }
        }
        let nnodes = ncells * heading_count;
        let mut succ = vec![Vec::new(); nnodes];
        for y in 0..map.height() {
            for x in 0..map.width() {
                if !cell_free[(y * map.width() + x) as usize] {
                    continue;
                }
                let origin = map.cell_center(x, y);
                for heading in 0..heading_count {
                    let node = LatticeNode { x, y, heading };
                    let id = node_id_raw(&map, heading_count, node);
                    let edges = &mut succ[id as usize];
                    for (pi, prim) in prims.iter().enumerate() {
                        if prim.start_heading != heading {
                            continue;
                        }
                        let ex = x + prim.offset.0;
                        let ey = y + prim.offset.1;
                        if !map.in_bounds(ex, ey)
                            || !cell_free[(ey * map.width() + ex) as usize]
                        {
                            continue;
                        }
                        if !sweep_segments_clear(prim, origin, &map, radius, Some(&center_dist)) {
                            continue;
                        }
                        let to = LatticeNode {
                            x: ex,
                            y: ey,
                            heading: prim.end_heading,
                        };
                        edges.push(Edge {
                            to: node_id_raw(&map, heading_count, to),
                            prim: pi as u32,
                            cost: prim.cost,
                        });
                    }
                }
            }
        }
        Ok(Lattice {
            map,
            radius,
            heading_count,
            prims,
            cell_free,
            succ,
            grid_heuristic_scale,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn heading_count(&self) -> usize {
        self.heading_count
    }

    pub fn primitives(&self) -> &[MotionPrimitive] {
        &self.prims
    }

    pub fn prim(&self, idx: u32) -> &MotionPrimitive {
        &self.prims[idx as usize]
    }

    pub fn grid_heuristic_scale(&self) -> f64 {
        self.grid_heuristic_scale
    }

    pub fn node_count(&self) -> usize {
        self.succ.len()
    }

    pub fn node_id(&self, node: LatticeNode) -> NodeId {
        node_id_raw(&self.map, self.heading_count, node)
    }

    pub fn node_of(&self, id: NodeId) -> LatticeNode {
        let h = (id as usize) % self.heading_count;
        let cell = (id as usize) / self.heading_count;
        LatticeNode {
            x: (cell as i32) % self.map.width(),
            y: (cell as i32) / self.map.width(),
            heading: h,
        }
    }

    /// Node cell is inside the map and free in configuration space (cell
    /// center at least one agent radius clear of obstacles).
    pub fn cell_free(&self, x: i32, y: i32) -> bool {
        self.map.in_bounds(x, y) && self.cell_free[(y * self.map.width() + x) as usize]
    }

    pub fn node_valid(&self, node: LatticeNode) -> bool {
        node.heading < self.heading_count && self.cell_free(node.x, node.y)
    }

    pub fn successors(&self, node: LatticeNode) -> &[Edge] {
        let id = self.node_id(node);
        &self.succ[id as usize]
    }

    pub fn node_pose(&self, node: LatticeNode) -> Pose {
        let c = self.map.cell_center(node.x, node.y);
        Pose::new(c.x, c.y, heading_angle(node.heading, self.heading_count))
    }

    /// Snap a pose to the nearest lattice node (cell of the position plus
    /// nearest heading index).
    pub fn snap(&self, pose: &Pose) -> LatticeNode {
        let (x, y) = self.map.cell_of(pose.pos());
        let step = TAU / self.heading_count as f64;
        let heading = ((crate::geom::wrap_angle(pose.theta) / step).round() as usize)
            % self.heading_count;
        LatticeNode { x, y, heading }
    }
}

fn node_id_raw(map: &GridMap, heading_count: usize, node: LatticeNode) -> NodeId {
    (((node.y * map.width() + node.x) as usize) * heading_count + node.heading) as NodeId
}

/// Walk a primitive's sweep densely and accumulate the 8-connected length of
/// the cell chain it visits; the ratio cost/chain bounds how far a grid path
/// along those cells can exceed the primitive cost.
fn grid_heuristic_scale(prims: &[MotionPrimitive], resolution: f64) -> f64 {
    let mut scale: f64 = 1.0;
    for p in prims {
        if p.offset == (0, 0) {
            continue;
        }
        let mut chain = 0.0;
        let mut cell = (0i32, 0i32);
        let step = resolution / 20.0;
        for w in p.sweep.windows(2) {
            let a = w[0].pos();
            let b = w[1].pos();
            let n = (a.dist(b) / step).ceil().max(1.0) as usize;
            for i in 1..=n {
                let q = a + (b - a) * (i as f64 / n as f64);
                let c = (
                    (q.x / resolution + 0.5).floor() as i32,
                    (q.y / resolution + 0.5).floor() as i32,
                );
                if c != cell {
                    let dx = (c.0 - cell.0).abs();
                    let dy = (c.1 - cell.1).abs();
                    chain += if dx + dy >= 2 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    } * resolution;
                    cell = c;
                }
            }
        }
        if chain > 0.0 {
            scale = scale.min(p.cost / chain);
        }
    }
    scale
}

/// Graph view used by the planner; implemented by the base lattice and by
/// masked views with temporary obstacles.
pub trait SearchGraph {
    fn base(&self) -> &Lattice;
    fn node_free(&self, x: i32, y: i32) -> bool;
    fn successors_into(&self, node: LatticeNode, out: &mut Vec<Edge>);
}

impl SearchGraph for Lattice {
    fn base(&self) -> &Lattice {
        self
    }

    fn node_free(&self, x: i32, y: i32) -> bool {
        self.cell_free(x, y)
    }

    fn successors_into(&self, node: LatticeNode, out: &mut Vec<Edge>) {
        out.extend_from_slice(self.successors(node));
    }
}

/// Lattice view with a few cells marked as temporary obstacles (corridor
/// entries during a denial). Edges whose swept disk touches a masked cell
/// are dropped.
pub struct MaskedLattice<'a> {
    lattice: &'a Lattice,
    masked: Vec<(i32, i32)>,
}

impl<'a> MaskedLattice<'a> {
    pub fn new(lattice: &'a Lattice, masked: Vec<(i32, i32)>) -> Self {
        MaskedLattice { lattice, masked }
    }

    pub fn masked_cells(&self) -> &[(i32, i32)] {
        &self.masked
    }

    fn edge_clear(&self, from: LatticeNode, edge: &Edge) -> bool {
        let to = self.lattice.node_of(edge.to);
        if self.masked.contains(&(to.x, to.y)) || self.masked.contains(&(from.x, from.y)) {
            return false;
        }
        let prim = self.lattice.prim(edge.prim);
        let origin = self.lattice.map().cell_center(from.x, from.y);
        let radius = self.lattice.radius();
        for w in prim.sweep.windows(2) {
            let a = origin + w[0].pos();
            let b = origin + w[1].pos();
            for &(mx, my) in &self.masked {
                if seg_rect_dist(a, b, &self.lattice.map().cell_rect(mx, my)) < radius {
                    return false;
                }
            }
        }
        true
    }
}

impl SearchGraph for MaskedLattice<'_> {
    fn base(&self) -> &Lattice {
        self.lattice
    }

    fn node_free(&self, x: i32, y: i32) -> bool {
        self.lattice.cell_free(x, y) && !self.masked.contains(&(x, y))
    }

    fn successors_into(&self, node: LatticeNode, out: &mut Vec<Edge>) {
        for e in self.lattice.successors(node) {
            if self.edge_clear(node, e) {
                out.push(*e);
            }
        }
    }
}
