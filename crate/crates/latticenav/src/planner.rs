//! Weighted A* over the lattice graph with an optional decreasing-inflation
//! (anytime) schedule. Replans run from scratch; desk-scale graphs make
//! incremental repair unnecessary.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::grid::GridMap;
use crate::lattice::{Lattice, LatticeNode, NodeId, Pose, SearchGraph};

/// Global path: lattice poses connected by single motion primitives.
/// `cum[i]` is the accumulated primitive cost up to pose `i`, so
/// `length() == cum.last()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub poses: Vec<Pose>,
    pub prims: Vec<u32>,
    pub cum: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub pos: Vec2,
    pub theta: f64,
    /// Accumulated cost-distance from the path start (primitive costs,
    /// interpolated inside each primitive).
    pub cum: f64,
}

impl Path {
    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    pub fn start(&self) -> &Pose {
        &self.poses[0]
    }

    pub fn goal(&self) -> &Pose {
        self.poses.last().unwrap()
    }

    pub fn is_empty_motion(&self) -> bool {
        self.prims.is_empty()
    }

    /// Sub-path from pose index `idx` to the goal, cost rebased to zero.
    pub fn suffix_at(&self, idx: usize) -> Path {
        let base = self.cum[idx];
        Path {
            poses: self.poses[idx..].to_vec(),
            prims: self.prims[idx..].to_vec(),
            cum: self.cum[idx..].iter().map(|c| c - base).collect(),
        }
    }

    /// Resample the path geometry into waypoints at most `spacing` apart
    /// (evenly along each primitive), returning the waypoints and, for each
    /// pose, the index of its waypoint.
    pub fn sample_waypoints(&self, lattice: &Lattice, spacing: f64) -> (Vec<Waypoint>, Vec<usize>) {
        let mut wps = vec![Waypoint {
            pos: self.poses[0].pos(),
            theta: self.poses[0].theta,
            cum: 0.0,
        }];
        let mut pose_wp = vec![0usize];
        for (i, &prim_id) in self.prims.iter().enumerate() {
            let prim = lattice.prim(prim_id);
            let origin = self.poses[i].pos();
            let pts: Vec<Vec2> = prim.sweep.iter().map(|s| origin + s.pos()).collect();
            let mut seg_cum = vec![0.0];
            for w in pts.windows(2) {
                seg_cum.push(seg_cum.last().unwrap() + w[0].dist(w[1]));
            }
            let geo_len = *seg_cum.last().unwrap();
            if geo_len > 0.0 {
                // Even arc-length resampling keeps hop sizes near `spacing`.
                let pieces = (geo_len / spacing).ceil().max(1.0) as usize;
                let mut seg = 0usize;
                for k in 1..=pieces {
                    let target = geo_len * k as f64 / pieces as f64;
                    while seg + 1 < seg_cum.len() - 1 && seg_cum[seg + 1] < target {
                        seg += 1;
                    }
                    let span = seg_cum[seg + 1] - seg_cum[seg];
                    let t = if span > 0.0 {
                        (target - seg_cum[seg]) / span
                    } else {
                        1.0
                    };
                    wps.push(Waypoint {
                        pos: pts[seg] + (pts[seg + 1] - pts[seg]) * t,
                        theta: prim.sweep[seg + 1].theta,
                        cum: self.cum[i] + prim.cost * target / geo_len,
                    });
                }
            } else {
                // In-place rotation: keep the sweep samples, cost spread evenly.
                let nseg = (prim.sweep.len() - 1).max(1);
                for (k, s) in prim.sweep.iter().enumerate().skip(1) {
                    wps.push(Waypoint {
                        pos: origin + s.pos(),
                        theta: s.theta,
                        cum: self.cum[i] + prim.cost * k as f64 / nseg as f64,
                    });
                }
            }
            // Pin the pose waypoint exactly.
            let last = wps.last_mut().unwrap();
            last.pos = self.poses[i + 1].pos();
            last.theta = self.poses[i + 1].theta;
            last.cum = self.cum[i + 1];
            pose_wp.push(wps.len() - 1);
        }
        (wps, pose_wp)
    }

    /// Check the structural path invariants against the lattice.
    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if self.poses.len() != self.prims.len() + 1 || self.cum.len() != self.poses.len() {
            return Err(Error::InvalidQuery("inconsistent path arrays".into()));
        }
        if self.cum[0] != 0.0 {
            return Err(Error::InvalidQuery("cumulative distance must start at 0".into()));
        }
        for (i, &prim_id) in self.prims.iter().enumerate() {
            let prim = lattice.prim(prim_id);
            let a = lattice.snap(&self.poses[i]);
            let b = lattice.snap(&self.poses[i + 1]);
            if prim.start_heading != a.heading
                || prim.end_heading != b.heading
                || (b.x - a.x, b.y - a.y) != prim.offset
            {
                return Err(Error::InvalidQuery(format!(
                    "poses {i}..{} not connected by primitive {prim_id}",
                    i + 1
                )));
            }
            if (self.cum[i + 1] - self.cum[i] - prim.cost).abs() > 1e-9 {
                return Err(Error::InvalidQuery("cumulative distance mismatch".into()));
            }
            if !crate::lattice::placed_sweep_collision_free(
                prim,
                (a.x, a.y),
                lattice.map(),
                lattice.radius(),
            ) {
                return Err(Error::InvalidQuery(format!(
                    "primitive {prim_id} at pose {i} is not collision-free"
                )));
            }
        }
        Ok(())
    }
}

/// Planning request. Goals are 2-D positions; the goal heading is free
/// unless explicitly constrained.
#[derive(Debug, Clone)]
pub struct PlanQuery {
    pub start: Pose,
    pub goal: Vec2,
    pub goal_heading: Option<usize>,
    pub epsilon: f64,
    pub max_expansions: Option<usize>,
}

impl PlanQuery {
    pub fn new(start: Pose, goal: Vec2, epsilon: f64) -> Self {
        PlanQuery {
            start,
            goal,
            goal_heading: None,
            epsilon,
            max_expansions: None,
        }
    }
}

/// Per-goal admissible heuristic: obstacle-aware 2-D Dijkstra over the raw
/// unoccupied grid (8-connected), scaled by the lattice's admissibility
/// factor and floored by straight-line distance.
#[derive(Debug, Clone)]
pub struct HeuristicTable {
    goal_cell: (i32, i32),
    dist: Vec<f64>,
    width: i32,
    resolution: f64,
    scale: f64,
}

impl HeuristicTable {
    pub fn build(lattice: &Lattice, goal_cell: (i32, i32)) -> Self {
        let map = lattice.map();
        let (w, h) = (map.width(), map.height());
        let res = map.resolution();
        let mut dist = vec![f64::INFINITY; (w * h) as usize];
        let mut heap: BinaryHeap<std::cmp::Reverse<(u64, i32)>> = BinaryHeap::new();
        let start = (goal_cell.1 * w + goal_cell.0) as usize;
        if map.in_bounds(goal_cell.0, goal_cell.1) && !map.occupied(goal_cell.0, goal_cell.1) {
            dist[start] = 0.0;
            heap.push(std::cmp::Reverse((0, start as i32)));
        }
        let diag = res * std::f64::consts::SQRT_2;
        while let Some(std::cmp::Reverse((dbits, idx))) = heap.pop() {
            let d = f64::from_bits(dbits);
            if d > dist[idx as usize] {
                continue;
            }
            let (x, y) = (idx % w, idx / w);
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if map.occupied(nx, ny) {
                        continue;
                    }
                    let step = if dx != 0 && dy != 0 { diag } else { res };
                    let nd = d + step;
                    let nidx = (ny * w + nx) as usize;
                    if nd < dist[nidx] {
                        dist[nidx] = nd;
                        heap.push(std::cmp::Reverse((nd.to_bits(), nidx as i32)));
                    }
                }
            }
        }
        HeuristicTable {
            goal_cell,
            dist,
            width: w,
            resolution: res,
            scale: lattice.grid_heuristic_scale(),
        }
    }

    pub fn goal_cell(&self) -> (i32, i32) {
        self.goal_cell
    }

    /// Raw 8-connected grid distance from `cell` to the goal cell.
    pub fn grid_dist(&self, cell: (i32, i32)) -> f64 {
        self.dist[(cell.1 * self.width + cell.0) as usize]
    }

    /// Admissible estimate in meters from `cell` to the goal cell.
    pub fn value(&self, cell: (i32, i32)) -> f64 {
        let g = self.grid_dist(cell);
        if g.is_infinite() {
            return f64::INFINITY;
        }
        let dx = (cell.0 - self.goal_cell.0) as f64 * self.resolution;
        let dy = (cell.1 - self.goal_cell.1) as f64 * self.resolution;
        let euclid = (dx * dx + dy * dy).sqrt();
        euclid.max(self.scale * g)
    }
}

struct OpenEntry {
    f: f64,
    tie: u64,
    g: f64,
    node: NodeId,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: invert so the smallest (f, tie) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.tie.cmp(&self.tie))
    }
}

/// From-scratch weighted A* with reusable scratch arrays. One instance per
/// concurrent caller; the lattice itself is shared read-only.
pub struct Planner {
    g: Vec<f64>,
    parent: Vec<(NodeId, u32)>,
    stamp: Vec<u32>,
    closed: Vec<u32>,
    epoch: u32,
}

impl Planner {
    pub fn new(node_count: usize) -> Self {
        Planner {
            g: vec![0.0; node_count],
            parent: vec![(0, 0); node_count],
            stamp: vec![0; node_count],
            closed: vec![0; node_count],
            epoch: 0,
        }
    }

    pub fn for_lattice(lattice: &Lattice) -> Self {
        Planner::new(lattice.node_count())
    }

    /// Plan a path for `query`; the result cost is within
    /// `query.epsilon` of optimal. Deterministic for fixed inputs: equal-f
    /// nodes expand in lexicographic (cell_x, cell_y, heading) order.
    pub fn plan<G: SearchGraph>(
        &mut self,
        graph: &G,
        query: &PlanQuery,
        heuristic: &HeuristicTable,
    ) -> Result<Path> {
        self.plan_counted(graph, query, heuristic).map(|(p, _)| p)
    }

    /// Repeated weighted A* with a decreasing inflation schedule, returning
    /// the best path found within the shared expansion budget.
    pub fn plan_anytime<G: SearchGraph>(
        &mut self,
        graph: &G,
        query: &PlanQuery,
        heuristic: &HeuristicTable,
        schedule: &[f64],
    ) -> Result<Path> {
        let mut budget = query.max_expansions;
        let mut best: Option<Path> = None;
        for &eps in schedule {
            if matches!(budget, Some(0)) {
                break;
            }
            let mut q = query.clone();
            q.epsilon = eps.max(1.0);
            q.max_expansions = budget;
            match self.plan_counted(graph, &q, heuristic) {
                Ok((path, used)) => {
                    if let Some(b) = budget.as_mut() {
                        *b = b.saturating_sub(used);
                    }
                    if best.as_ref().map_or(true, |b| path.length() < b.length()) {
                        best = Some(path);
                    }
                }
                Err(e) => {
                    if best.is_none() {
                        return Err(e);
                    }
                    break;
                }
            }
        }
        best.ok_or(Error::NoPath)
    }

    fn plan_counted<G: SearchGraph>(
        &mut self,
        graph: &G,
        query: &PlanQuery,
        heuristic: &HeuristicTable,
    ) -> Result<(Path, usize)> {
        if query.epsilon < 1.0 {
            return Err(Error::InvalidQuery("epsilon must be at least 1".into()));
        }
        let lattice = graph.base();
        let start = lattice.snap(&query.start);
        if !graph.node_free(start.x, start.y) {
            return Err(Error::InvalidQuery(format!(
                "start cell ({}, {}) is occupied",
                start.x, start.y
            )));
        }
        let goal_cell = lattice.map().cell_of(query.goal);
        if !graph.node_free(goal_cell.0, goal_cell.1) {
            return Err(Error::InvalidQuery(format!(
                "goal cell ({}, {}) is occupied",
                goal_cell.0, goal_cell.1
            )));
        }
        debug_assert_eq!(heuristic.goal_cell(), goal_cell, "heuristic built for another goal");

        let at_goal = |n: LatticeNode| {
            (n.x, n.y) == goal_cell && query.goal_heading.map_or(true, |gh| gh == n.heading)
        };
        if at_goal(start) {
            return Ok((
                Path {
                    poses: vec![lattice.node_pose(start)],
                    prims: vec![],
                    cum: vec![0.0],
                },
                0,
            ));
        }
        if heuristic.value((start.x, start.y)).is_infinite() {
            return Err(Error::NoPath);
        }

        self.epoch += 1;
        let epoch = self.epoch;
        let mut open = BinaryHeap::new();
        let start_id = lattice.node_id(start);
        self.g[start_id as usize] = 0.0;
        self.stamp[start_id as usize] = epoch;
        open.push(OpenEntry {
            f: query.epsilon * heuristic.value((start.x, start.y)),
            tie: tie_key(start),
            g: 0.0,
            node: start_id,
        });

        let mut expansions = 0usize;
        let mut edges = Vec::with_capacity(8);
        while let Some(entry) = open.pop() {
            let id = entry.node as usize;
            if self.stamp[id] != epoch || entry.g > self.g[id] {
                continue;
            }
            if self.closed[id] == epoch {
                continue;
            }
            self.closed[id] = epoch;
            let node = lattice.node_of(entry.node);
            if at_goal(node) {
                return Ok((self.reconstruct(lattice, start_id, entry.node), expansions));
            }
            expansions += 1;
            if let Some(max) = query.max_expansions {
                if expansions > max {
                    return Err(Error::NoPath);
                }
            }
            edges.clear();
            graph.successors_into(node, &mut edges);
            for e in &edges {
                let nid = e.to as usize;
                if self.closed[nid] == epoch {
                    continue;
                }
                let ng = entry.g + e.cost;
                if self.stamp[nid] != epoch || ng < self.g[nid] {
                    self.g[nid] = ng;
                    self.stamp[nid] = epoch;
                    self.parent[nid] = (entry.node, e.prim);
                    let to = lattice.node_of(e.to);
                    let h = heuristic.value((to.x, to.y));
                    if h.is_infinite() {
                        continue;
                    }
                    open.push(OpenEntry {
                        f: ng + query.epsilon * h,
                        tie: tie_key(to),
                        g: ng,
                        node: e.to,
                    });
                }
            }
        }
        Err(Error::NoPath)
    }

    fn reconstruct(&self, lattice: &Lattice, start: NodeId, goal: NodeId) -> Path {
        let mut rev = Vec::new();
        let mut cur = goal;
        while cur != start {
            let (prev, prim) = self.parent[cur as usize];
            rev.push((cur, prim));
            cur = prev;
        }
        let mut poses = vec![lattice.node_pose(lattice.node_of(start))];
        let mut prims = Vec::with_capacity(rev.len());
        let mut cum = vec![0.0];
        for (node, prim) in rev.into_iter().rev() {
            poses.push(lattice.node_pose(lattice.node_of(node)));
            prims.push(prim);
            cum.push(cum.last().unwrap() + lattice.prim(prim).cost);
        }
        Path { poses, prims, cum }
    }
}

fn tie_key(n: LatticeNode) -> u64 {
    ((n.x as u64) << 42) | ((n.y as u64) << 21) | n.heading as u64
}

/// Sub-path of `path` starting at the pose matching `position` (within
/// `tol`), per the replanning rule that evaluates the remaining portion of
/// the path from the agent's current position.
pub fn suffix_from(path: &Path, position: Vec2, tol: f64) -> Result<Path> {
    for (i, p) in path.poses.iter().enumerate() {
        if p.pos().dist(position) <= tol {
            return Ok(path.suffix_at(i));
        }
    }
    Err(Error::NotOnPath)
}

/// Convenience: build a straight scenario map, used in tests and docs.
pub fn open_corridor_map(len: i32, width: i32, resolution: f64) -> GridMap {
    GridMap::new(len, width, resolution, &[]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridMap;
    use crate::lattice::Lattice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corridor_lattice() -> Lattice {
        Lattice::build(open_corridor_map(10, 3, 1.0), 0.45, 8, 2.0).unwrap()
    }

    // Independent oracle: plain Dijkstra over the same successor graph,
    // no heuristic, scanning every node.
    fn dijkstra_cost(lattice: &Lattice, start: LatticeNode, goal_cell: (i32, i32)) -> Option<f64> {
        let mut dist = vec![f64::INFINITY; lattice.node_count()];
        let mut heap: BinaryHeap<std::cmp::Reverse<(u64, NodeId)>> = BinaryHeap::new();
        let sid = lattice.node_id(start);
        dist[sid as usize] = 0.0;
        heap.push(std::cmp::Reverse((0, sid)));
        let mut best: Option<f64> = None;
        while let Some(std::cmp::Reverse((dbits, id))) = heap.pop() {
            let d = f64::from_bits(dbits);
            if d > dist[id as usize] {
                continue;
            }
            let node = lattice.node_of(id);
            if (node.x, node.y) == goal_cell {
                best = Some(d);
                break;
            }
            for e in lattice.successors(node) {
                let nd = d + e.cost;
                if nd < dist[e.to as usize] {
                    dist[e.to as usize] = nd;
                    heap.push(std::cmp::Reverse((nd.to_bits(), e.to)));
                }
            }
        }
        best
    }

    #[test]
    fn straight_corridor_is_nine_meters() {
        let lat = corridor_lattice();
        let mut planner = Planner::for_lattice(&lat);
        let query = PlanQuery::new(
            Pose::new(0.5, 1.5, 0.0),
            Vec2::new(9.5, 1.5),
            1.0,
        );
        let h = HeuristicTable::build(&lat, (9, 1));
        let path = planner.plan(&lat, &query, &h).unwrap();
        assert!((path.length() - 9.0).abs() < 1e-9, "length {}", path.length());
        let oracle = dijkstra_cost(&lat, lat.snap(&query.start), (9, 1)).unwrap();
        assert!((path.length() - oracle).abs() < 1e-9);
        path.validate(&lat).unwrap();
    }

    #[test]
    fn start_equals_goal_yields_empty_motion() {
        let lat = corridor_lattice();
        let mut planner = Planner::for_lattice(&lat);
        let query = PlanQuery::new(Pose::new(2.5, 1.5, 0.0), Vec2::new(2.5, 1.5), 1.0);
        let h = HeuristicTable::build(&lat, (2, 1));
        let path = planner.plan(&lat, &query, &h).unwrap();
        assert!(path.is_empty_motion());
        assert_eq!(path.length(), 0.0);
    }

    #[test]
    fn occupied_goal_is_invalid_query() {
        let map = GridMap::new(10, 3, 1.0, &[(9, 1)]).unwrap();
        let lat = Lattice::build(map, 0.45, 8, 2.0).unwrap();
        let mut planner = Planner::for_lattice(&lat);
        let query = PlanQuery::new(Pose::new(0.5, 1.5, 0.0), Vec2::new(9.5, 1.5), 1.0);
        let h = HeuristicTable::build(&lat, (9, 1));
        match planner.plan(&lat, &query, &h) {
            Err(Error::InvalidQuery(_)) => {}
            other => panic!("expected invalid query, got {other:?}"),
        }
    }

    #[test]
    fn suffix_cases() {
        let lat = corridor_lattice();
        let mut planner = Planner::for_lattice(&lat);
        let query = PlanQuery::new(Pose::new(0.5, 1.5, 0.0), Vec2::new(9.5, 1.5), 1.0);
        let h = HeuristicTable::build(&lat, (9, 1));
        let path = planner.plan(&lat, &query, &h).unwrap();

        let whole = suffix_from(&path, Vec2::new(0.5, 1.5), 0.1).unwrap();
        assert_eq!(whole, path);

        let end = suffix_from(&path, Vec2::new(9.5, 1.5), 0.1).unwrap();
        assert_eq!(end.length(), 0.0);

        // Pose 5 m in: cumulative bookkeeping must give 4 m remaining.
        let mid = suffix_from(&path, Vec2::new(5.5, 1.5), 0.1).unwrap();
        assert!((mid.length() - 4.0).abs() < 1e-9);
        let manual: f64 = mid.prims.iter().map(|&p| lat.prim(p).cost).sum();
        assert!((mid.length() - manual).abs() < 1e-12);

        assert!(matches!(
            suffix_from(&path, Vec2::new(4.9, 1.9), 0.1),
            Err(Error::NotOnPath)
        ));
    }

    #[test]
    fn heuristic_zero_at_goal_and_bounded_in_open_space() {
        let lat = Lattice::build(open_corridor_map(15, 15, 1.0), 0.4, 8, 2.0).unwrap();
        let h = HeuristicTable::build(&lat, (12, 7));
        assert_eq!(h.value((12, 7)), 0.0);
        for (cell, _) in [((2, 3), ()), ((7, 12), ()), ((0, 0), ()), ((14, 7), ())] {
            let euclid = lat
                .map()
                .cell_center(cell.0, cell.1)
                .dist(lat.map().cell_center(12, 7));
            let v = h.value(cell);
            assert!(v >= euclid - 1e-9, "cell {cell:?}: {v} < euclid {euclid}");
            assert!(v <= h.grid_dist(cell) + 1e-9);
        }
    }

    #[test]
    fn heuristic_never_exceeds_true_cost_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut tested = 0;
        while tested < 200 {
            let mut occupied = Vec::new();
            for _ in 0..rng.gen_range(5..40) {
                occupied.push((rng.gen_range(0..15), rng.gen_range(0..15)));
            }
            let map = GridMap::new(15, 15, 1.0, &occupied).unwrap();
            let lat = Lattice::build(map, 0.3, 8, 2.0).unwrap();
            let mut planner = Planner::for_lattice(&lat);
            for _ in 0..10 {
                let sx = rng.gen_range(0..15);
                let sy = rng.gen_range(0..15);
                let gx = rng.gen_range(0..15);
                let gy = rng.gen_range(0..15);
                if !lat.cell_free(sx, sy) || !lat.cell_free(gx, gy) {
                    continue;
                }
                let heading = rng.gen_range(0..8);
                let start = lat.node_pose(LatticeNode { x: sx, y: sy, heading });
                let h = HeuristicTable::build(&lat, (gx, gy));
                let query = PlanQuery::new(start, lat.map().cell_center(gx, gy), 1.0);
                match planner.plan(&lat, &query, &h) {
                    Ok(path) => {
                        let est = h.value((sx, sy));
                        assert!(
                            est <= path.length() + 1e-9,
                            "inadmissible: h={est} cost={} start=({sx},{sy},{heading}) goal=({gx},{gy})",
                            path.length()
                        );
                        tested += 1;
                    }
                    Err(_) => continue,
                }
            }
        }
    }

    #[test]
    fn optimal_plans_match_dijkstra_and_inflated_plans_stay_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tested = 0;
        while tested < 30 {
            let mut occupied = Vec::new();
            for _ in 0..rng.gen_range(10..60) {
                occupied.push((rng.gen_range(0..20), rng.gen_range(0..20)));
            }
            let map = GridMap::new(20, 20, 1.0, &occupied).unwrap();
            let lat = Lattice::build(map, 0.3, 8, 2.0).unwrap();
            let mut planner = Planner::for_lattice(&lat);
            let sx = rng.gen_range(0..20);
            let sy = rng.gen_range(0..20);
            let gx = rng.gen_range(0..20);
            let gy = rng.gen_range(0..20);
            if !lat.cell_free(sx, sy) || !lat.cell_free(gx, gy) {
                continue;
            }
            let start = lat.node_pose(LatticeNode { x: sx, y: sy, heading: rng.gen_range(0..8) });
            let h = HeuristicTable::build(&lat, (gx, gy));
            let q1 = PlanQuery::new(start, lat.map().cell_center(gx, gy), 1.0);
            let oracle = dijkstra_cost(&lat, lat.snap(&start), (gx, gy));
            match (planner.plan(&lat, &q1, &h), oracle) {
                (Ok(path), Some(cost)) => {
                    assert!(
                        (path.length() - cost).abs() < 1e-9,
                        "eps=1 cost {} vs oracle {cost}",
                        path.length()
                    );
                    let mut q2 = q1.clone();
                    q2.epsilon = 2.0;
                    let inflated = planner.plan(&lat, &q2, &h).unwrap();
                    assert!(inflated.length() <= 2.0 * cost + 1e-9);
                    inflated.validate(&lat).unwrap();
                    tested += 1;
                }
                (Err(Error::NoPath), None) => {
                    tested += 1;
                }
                (got, want) => panic!("planner {got:?} vs oracle {want:?}"),
            }
        }
    }

    #[test]
    fn planning_is_deterministic() {
        let lat = corridor_lattice();
        let mut planner = Planner::for_lattice(&lat);
        let query = PlanQuery::new(Pose::new(0.5, 0.5, 0.0), Vec2::new(9.5, 2.5), 1.0);
        let h = HeuristicTable::build(&lat, (9, 2));
        let a = planner.plan(&lat, &query, &h).unwrap();
        let b = planner.plan(&lat, &query, &h).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn anytime_schedule_returns_best_found() {
        let lat = corridor_lattice();
        let mut planner = Planner::for_lattice(&lat);
        let query = PlanQuery::new(Pose::new(0.5, 1.5, 0.0), Vec2::new(9.5, 1.5), 1.0);
        let h = HeuristicTable::build(&lat, (9, 1));
        let path = planner
            .plan_anytime(&lat, &query, &h, &[3.0, 2.0, 1.0])
            .unwrap();
        assert!((path.length() - 9.0).abs() < 1e-9);
    }

    #[test]
    fn waypoints_respect_spacing_and_cost_accounting() {
        let lat = corridor_lattice();
        let mut planner = Planner::for_lattice(&lat);
        let query = PlanQuery::new(Pose::new(0.5, 1.5, 0.0), Vec2::new(9.5, 1.5), 1.0);
        let h = HeuristicTable::build(&lat, (9, 1));
        let path = planner.plan(&lat, &query, &h).unwrap();
        let (wps, pose_wp) = path.sample_waypoints(&lat, 0.45);
        assert_eq!(pose_wp.len(), path.poses.len());
        assert_eq!(wps[0].pos, path.poses[0].pos());
        assert_eq!(wps.last().unwrap().pos, path.goal().pos());
        assert!((wps.last().unwrap().cum - path.length()).abs() < 1e-9);
        for w in wps.windows(2) {
            assert!(w[0].pos.dist(w[1].pos) <= 0.45 + 1e-9);
            assert!(w[1].cum >= w[0].cum);
        }
    }
}
