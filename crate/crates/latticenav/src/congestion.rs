//! Congestion-metric replanning: build the candidate path set (current path
//! plus one replanned path through each successor primitive) and pick the
//! candidate minimizing the weighted sum of predicted-collision, path-length
//! and crowding costs.

use crate::geom::Vec2;
use crate::lattice::{LatticeNode, SearchGraph};
use crate::planner::{HeuristicTable, Path, PlanQuery, Planner, Waypoint};

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionWeights {
    pub k_c: f64,
    pub k_g: f64,
    pub k_n: f64,
    /// Crowding cutoff as a multiple of the agent radius.
    pub crowding_factor: f64,
    /// Number of leading waypoints evaluated per candidate.
    pub horizon_steps: usize,
    /// Added once per neighbor predicted to conflict with the candidate.
    pub collision_penalty: f64,
}

impl Default for CongestionWeights {
    fn default() -> Self {
        CongestionWeights {
            k_c: 10.0,
            k_g: 1.0,
            k_n: 2.0,
            crowding_factor: 5.0,
            horizon_steps: 20,
            collision_penalty: 1.0,
        }
    }
}

/// Position, velocity and radius of one sensed neighbor, taken from the
/// common start-of-step snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub radius: f64,
}

/// One alternative route: the branch path from the anchor node to the goal
/// plus the evaluated waypoints starting at the agent's current position.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub path: Path,
    pub wps: Vec<Waypoint>,
    /// Waypoint index of each branch pose (the first one is the anchor).
    pub pose_wp: Vec<usize>,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    /// Index of the agent's current branch within `candidates`, when it
    /// qualified (reaches the goal, or sole fallback).
    pub current_index: Option<usize>,
}

/// Predicted-collision cost: each neighbor is extrapolated at constant
/// velocity; if it comes within the summed radii of the waypoint the agent
/// occupies at the same time, the penalty is added once for that neighbor.
pub fn collision_cost(
    wps: &[Waypoint],
    neighbors: &[NeighborState],
    own_radius: f64,
    nominal_speed: f64,
    weights: &CongestionWeights,
) -> f64 {
    let horizon = wps.len().min(weights.horizon_steps);
    let mut cost = 0.0;
    for nb in neighbors {
        let hit = wps[..horizon].iter().any(|wp| {
            let t = wp.cum / nominal_speed;
            let predicted = nb.pos + nb.vel * t;
            predicted.dist(wp.pos) <= own_radius + nb.radius
        });
        if hit {
            cost += weights.collision_penalty;
        }
    }
    cost
}

/// Path-length increase over the best candidate in the set.
pub fn goal_cost(lengths: &[f64], idx: usize) -> f64 {
    let min = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    lengths[idx] - min
}

/// Crowding cost: neighbors held at their snapshot positions contribute
/// `1 / (t * d)` at each waypoint within `crowding_factor * R_i`, with the
/// arrival time clamped below by one control period.
pub fn crowding_cost(
    wps: &[Waypoint],
    neighbors: &[NeighborState],
    own_radius: f64,
    nominal_speed: f64,
    control_period: f64,
    weights: &CongestionWeights,
) -> f64 {
    let cutoff = weights.crowding_factor * own_radius;
    let horizon = wps.len().min(weights.horizon_steps);
    let mut cost = 0.0;
    for wp in &wps[..horizon] {
        let t = (wp.cum / nominal_speed).max(control_period);
        for nb in neighbors {
            let d = nb.pos.dist(wp.pos);
            if d <= cutoff {
                cost += 1.0 / (t * d.max(1e-9));
            }
        }
    }
    cost
}

/// Weighted congestion metric for candidate `idx` of the set.
pub fn congestion(
    set: &CandidateSet,
    idx: usize,
    neighbors: &[NeighborState],
    weights: &CongestionWeights,
    own_radius: f64,
    nominal_speed: f64,
    control_period: f64,
) -> f64 {
    let lengths: Vec<f64> = set.candidates.iter().map(|c| c.length).collect();
    let c = &set.candidates[idx];
    weights.k_c * collision_cost(&c.wps, neighbors, own_radius, nominal_speed, weights)
        + weights.k_g * goal_cost(&lengths, idx)
        + weights.k_n
            * crowding_cost(
                &c.wps,
                neighbors,
                own_radius,
                nominal_speed,
                control_period,
                weights,
            )
}

/// Build the candidate set from the anchor node: the current branch, plus
/// one branch through each successor primitive of the anchor (planned at the
/// replanning inflation). Candidates whose replan fails are dropped;
/// duplicates of an earlier candidate's pose sequence are removed. Only
/// branches that actually end at the goal compete; when none does (for
/// example a parked wait track while a passage is denied), the current
/// branch alone is returned.
///
/// `prefix` carries the already-committed waypoints from the agent's current
/// position up to the anchor (empty when the agent sits on the anchor);
/// every candidate shares it.
#[allow(clippy::too_many_arguments)]
pub fn candidate_paths<G: SearchGraph>(
    graph: &G,
    planner: &mut Planner,
    heuristic: &HeuristicTable,
    anchor: LatticeNode,
    current_branch: &Path,
    prefix: &[Waypoint],
    goal: Vec2,
    epsilon: f64,
    spacing: f64,
) -> CandidateSet {
    let lattice = graph.base();
    let mut candidates = Vec::new();
    let mut seen: Vec<Vec<(i64, i64, i64)>> = Vec::new();

    let mut push = |path: Path, candidates: &mut Vec<Candidate>| {
        let key: Vec<(i64, i64, i64)> = path
            .poses
            .iter()
            .map(|p| {
                (
                    (p.x * 1e6).round() as i64,
                    (p.y * 1e6).round() as i64,
                    (p.theta * 1e6).round() as i64,
                )
            })
            .collect();
        if seen.contains(&key) {
            return;
        }
        seen.push(key);
        let (branch_wps, branch_pose_wp) = path.sample_waypoints(lattice, spacing);
        let mut wps = prefix.to_vec();
        let base = wps.last().map_or(0.0, |w| w.cum);
        // The branch starts at the anchor pose, which the prefix already ends on.
        let skip = usize::from(!wps.is_empty());
        let shift = prefix.len() - skip;
        for w in branch_wps.iter().skip(skip) {
            wps.push(Waypoint {
                pos: w.pos,
                theta: w.theta,
                cum: base + w.cum,
            });
        }
        let pose_wp = branch_pose_wp.iter().map(|&i| i + shift).collect();
        let length = base + path.length();
        candidates.push(Candidate {
            path,
            wps,
            pose_wp,
            length,
        });
    };

    let goal_cell = lattice.map().cell_of(goal);
    let reaches_goal =
        |p: &Path| lattice.map().cell_of(p.goal().pos()) == goal_cell;
    // A branch through cells the graph forbids (temporary obstacles at a
    // denied corridor entry) no longer qualifies as a candidate.
    let respects_graph = |p: &Path| {
        p.poses.iter().all(|pose| {
            let (x, y) = lattice.map().cell_of(pose.pos());
            graph.node_free(x, y)
        })
    };

    let mut current_index = None;
    if reaches_goal(current_branch) && respects_graph(current_branch) {
        push(current_branch.clone(), &mut candidates);
        current_index = Some(0);
    }

    let mut edges = Vec::new();
    graph.successors_into(anchor, &mut edges);
    for e in &edges {
        let succ = lattice.node_of(e.to);
        let start = lattice.node_pose(succ);
        let mut query = PlanQuery::new(start, goal, epsilon);
        query.max_expansions = Some(20_000);
        let Ok(tail) = planner.plan(graph, &query, heuristic) else {
            continue;
        };
        let anchor_pose = lattice.node_pose(anchor);
        let mut poses = Vec::with_capacity(tail.poses.len() + 1);
        poses.push(anchor_pose);
        poses.extend_from_slice(&tail.poses);
        let mut prims = Vec::with_capacity(tail.prims.len() + 1);
        prims.push(e.prim);
        prims.extend_from_slice(&tail.prims);
        let mut cum = Vec::with_capacity(tail.cum.len() + 1);
        cum.push(0.0);
        cum.extend(tail.cum.iter().map(|c| c + e.cost));
        push(Path { poses, prims, cum }, &mut candidates);
    }

    if candidates.is_empty() {
        push(current_branch.clone(), &mut candidates);
        current_index = Some(0);
    }

    CandidateSet {
        candidates,
        current_index,
    }
}

/// Pick the candidate with minimal congestion; ties break toward the shorter
/// candidate, then the lower index. Returns the selected index.
pub fn conflict_resolution(
    set: &CandidateSet,
    neighbors: &[NeighborState],
    weights: &CongestionWeights,
    own_radius: f64,
    nominal_speed: f64,
    control_period: f64,
) -> usize {
    let mut best = 0usize;
    let mut best_cost = f64::INFINITY;
    for idx in 0..set.candidates.len() {
        let c = congestion(
            set,
            idx,
            neighbors,
            weights,
            own_radius,
            nominal_speed,
            control_period,
        );
        let better = c < best_cost
            || (c == best_cost && set.candidates[idx].length < set.candidates[best].length);
        if better {
            best = idx;
            best_cost = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridMap;
    use crate::lattice::Lattice;
    use crate::lattice::Pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wp(x: f64, y: f64, cum: f64) -> Waypoint {
        Waypoint {
            pos: Vec2::new(x, y),
            theta: 0.0,
            cum,
        }
    }

    fn stationary(x: f64, y: f64, r: f64) -> NeighborState {
        NeighborState {
            pos: Vec2::new(x, y),
            vel: Vec2::new(0.0, 0.0),
            radius: r,
        }
    }

    fn open_lattice(w: i32, h: i32) -> Lattice {
        Lattice::build(GridMap::new(w, h, 1.0, &[]).unwrap(), 0.45, 8, 2.0).unwrap()
    }

    #[test]
    fn collision_cost_zero_without_neighbors() {
        let wps: Vec<Waypoint> = (0..10).map(|i| wp(i as f64, 0.0, i as f64)).collect();
        let w = CongestionWeights::default();
        assert_eq!(collision_cost(&wps, &[], 0.5, 1.0, &w), 0.0);
    }

    #[test]
    fn stationary_neighbor_on_waypoint_costs_one_penalty() {
        let wps: Vec<Waypoint> = (0..10).map(|i| wp(i as f64, 0.0, i as f64)).collect();
        let w = CongestionWeights::default();
        // Sitting exactly on waypoint 3; hit once, not once per waypoint.
        let nb = stationary(3.0, 0.0, 0.5);
        let c = collision_cost(&wps, &[nb], 0.5, 1.0, &w);
        assert_eq!(c, w.collision_penalty);
    }

    #[test]
    fn goal_cost_matches_definition() {
        let lengths = [10.0, 12.5, 11.0];
        assert_eq!(goal_cost(&lengths, 0), 0.0);
        assert_eq!(goal_cost(&lengths, 1), 2.5);
        assert_eq!(goal_cost(&lengths, 2), 1.0);
        assert_eq!(goal_cost(&[7.25], 0), 0.0);
        // The shortest candidate always has zero goal cost.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let lens: Vec<f64> = (0..5).map(|_| rng.gen_range(1.0..50.0)).collect();
            let min_idx = lens
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(goal_cost(&lens, min_idx), 0.0);
            for i in 0..lens.len() {
                assert!(goal_cost(&lens, i) >= 0.0);
            }
        }
    }

    #[test]
    fn crowding_term_matches_formula() {
        // One waypoint reached at t = 2 s, neighbor 1 m away, R_i = 0.5:
        // within the 5R cutoff, contribution 1/(2*1) = 0.5.
        let w = CongestionWeights::default();
        let wps = [wp(2.0, 0.0, 2.0)];
        let nb = stationary(2.0, 1.0, 0.5);
        let c = crowding_cost(&wps, &[nb], 0.5, 1.0, 0.1, &w);
        assert!((c - 0.5).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn crowding_cutoff_beyond_five_radii() {
        let w = CongestionWeights::default();
        let wps = [wp(2.0, 0.0, 2.0)];
        let nb = stationary(2.0, 3.0, 0.5); // 3.0 m > 5 * 0.5 m
        assert_eq!(crowding_cost(&wps, &[nb], 0.5, 1.0, 0.1, &w), 0.0);
    }

    #[test]
    fn crowding_never_increases_when_neighbor_moves_away() {
        let w = CongestionWeights::default();
        let wps: Vec<Waypoint> = (0..15).map(|i| wp(i as f64 * 0.5, 0.0, i as f64 * 0.5)).collect();
        let mut prev = f64::INFINITY;
        // Moving the neighbor along +y takes it strictly farther from every
        // waypoint on the x-axis.
        for k in 0..20 {
            let nb = stationary(3.0, 0.3 + 0.2 * k as f64, 0.5);
            let c = crowding_cost(&wps, &[nb], 0.5, 1.0, 0.1, &w);
            assert!(c <= prev + 1e-12, "cost rose from {prev} to {c}");
            prev = c;
        }
    }

    #[test]
    fn congestion_is_the_weighted_sum() {
        // Synthetic candidate set with known term values: one neighbor
        // predicted on the path (collision 1), goal cost 2.5, crowding 0.5.
        let w = CongestionWeights {
            k_c: 10.0,
            k_g: 1.0,
            k_n: 2.0,
            crowding_factor: 5.0,
            horizon_steps: 20,
            collision_penalty: 1.0,
        };
        let wps = vec![wp(2.0, 0.0, 2.0)];
        let set = CandidateSet {
            current_index: Some(0),
            candidates: vec![
                Candidate {
                    path: Path {
                        poses: vec![Pose::new(0.0, 0.0, 0.0)],
                        prims: vec![],
                        cum: vec![0.0],
                    },
                    wps: wps.clone(),
                    pose_wp: vec![0],
                    length: 12.5,
                },
                Candidate {
                    path: Path {
                        poses: vec![Pose::new(0.0, 0.0, 0.0)],
                        prims: vec![],
                        cum: vec![0.0],
                    },
                    wps: vec![wp(50.0, 50.0, 2.0)],
                    pose_wp: vec![0],
                    length: 10.0,
                },
            ],
        };
        // Neighbor 1 m off the waypoint: exactly the summed radii, so the
        // collision prediction fires (term 1), crowding is 1/(2*1) = 0.5,
        // goal cost is 2.5. Weighted sum: 10 + 2.5 + 1.0 = 13.5.
        let nb = stationary(2.0, 1.0, 0.5);
        let got = congestion(&set, 0, &[nb], &w, 0.5, 1.0, 0.1);
        assert!((got - 13.5).abs() < 1e-12, "{got} vs 13.5");

        let zero = CongestionWeights {
            k_c: 0.0,
            k_g: 0.0,
            k_n: 0.0,
            ..w.clone()
        };
        assert_eq!(congestion(&set, 0, &[nb], &zero, 0.5, 1.0, 0.1), 0.0);

        // Without neighbors only the goal term remains.
        let got = congestion(&set, 0, &[], &w, 0.5, 1.0, 0.1);
        assert!((got - w.k_g * 2.5).abs() < 1e-12);
    }

    #[test]
    fn open_space_yields_current_plus_one_per_successor() {
        let lat = open_lattice(20, 20);
        let mut planner = Planner::for_lattice(&lat);
        let anchor = LatticeNode { x: 5, y: 10, heading: 0 };
        let goal = lat.map().cell_center(15, 10);
        let h = HeuristicTable::build(&lat, (15, 10));
        // Plant a detoured current path so no successor branch duplicates it.
        let detour_start = lat.node_pose(anchor);
        let mut q = PlanQuery::new(detour_start, lat.map().cell_center(15, 14), 1.0);
        let hd = HeuristicTable::build(&lat, (15, 14));
        let leg = planner.plan(&lat, &q, &hd).unwrap();
        let via = lat.node_pose(lat.snap(leg.goal()));
        q = PlanQuery::new(via, goal, 1.0);
        let leg2 = planner.plan(&lat, &q, &h).unwrap();
        let mut poses = leg.poses.clone();
        poses.extend_from_slice(&leg2.poses[1..]);
        let mut prims = leg.prims.clone();
        prims.extend_from_slice(&leg2.prims);
        let mut cum = leg.cum.clone();
        cum.extend(leg2.cum[1..].iter().map(|c| c + leg.length()));
        let current = Path { poses, prims, cum };

        let set = candidate_paths(&lat, &mut planner, &h, anchor, &current, &[], goal, 2.0, 0.45);
        assert_eq!(
            set.candidates.len(),
            1 + lat.successors(anchor).len(),
            "current + one per successor primitive"
        );
    }

    #[test]
    fn blocked_successor_candidate_is_absent() {
        // Wall directly east of the anchor: the forward primitive is gone.
        let map = GridMap::new(20, 20, 1.0, &[(6, 10), (6, 9), (6, 11)]).unwrap();
        let lat = Lattice::build(map, 0.45, 8, 2.0).unwrap();
        let mut planner = Planner::for_lattice(&lat);
        let anchor = LatticeNode { x: 5, y: 10, heading: 0 };
        let goal = lat.map().cell_center(15, 10);
        let h = HeuristicTable::build(&lat, (15, 10));
        let start = lat.node_pose(anchor);
        let q = PlanQuery::new(start, goal, 1.0);
        let current = planner.plan(&lat, &q, &h).unwrap();
        let set = candidate_paths(&lat, &mut planner, &h, anchor, &current, &[], goal, 2.0, 0.45);
        for c in &set.candidates[1..] {
            let first = lat.prim(c.path.prims[0]);
            assert_ne!(first.offset, (1, 0), "forward into the wall survived");
        }
    }

    #[test]
    fn candidate_lengths_bounded_below_by_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let mut occupied = Vec::new();
            for _ in 0..rng.gen_range(5..30) {
                occupied.push((rng.gen_range(0..15), rng.gen_range(0..15)));
            }
            let map = GridMap::new(15, 15, 1.0, &occupied).unwrap();
            let lat = Lattice::build(map, 0.3, 8, 2.0).unwrap();
            let mut planner = Planner::for_lattice(&lat);
            let ax = rng.gen_range(0..15);
            let ay = rng.gen_range(0..15);
            let gx = rng.gen_range(0..15);
            let gy = rng.gen_range(0..15);
            if !lat.cell_free(ax, ay) || !lat.cell_free(gx, gy) {
                continue;
            }
            let anchor = LatticeNode { x: ax, y: ay, heading: rng.gen_range(0..8) };
            let goal = lat.map().cell_center(gx, gy);
            let h = HeuristicTable::build(&lat, (gx, gy));
            let q = PlanQuery::new(lat.node_pose(anchor), goal, 1.0);
            let Ok(current) = planner.plan(&lat, &q, &h) else {
                continue;
            };
            let optimal = current.length();
            let set =
                candidate_paths(&lat, &mut planner, &h, anchor, &current, &[], goal, 2.0, 0.45);
            for c in &set.candidates {
                assert!(c.length >= optimal - 1e-9);
            }
        }
    }

    #[test]
    fn no_neighbors_selects_a_shortest_candidate() {
        let lat = open_lattice(20, 20);
        let mut planner = Planner::for_lattice(&lat);
        let anchor = LatticeNode { x: 3, y: 10, heading: 0 };
        let goal = lat.map().cell_center(16, 10);
        let h = HeuristicTable::build(&lat, (16, 10));
        let q = PlanQuery::new(lat.node_pose(anchor), goal, 1.0);
        let current = planner.plan(&lat, &q, &h).unwrap();
        let set = candidate_paths(&lat, &mut planner, &h, anchor, &current, &[], goal, 2.0, 0.45);
        let w = CongestionWeights::default();
        let idx = conflict_resolution(&set, &[], &w, 0.45, 1.0, 0.1);
        let min_len = set
            .candidates
            .iter()
            .map(|c| c.length)
            .fold(f64::INFINITY, f64::min);
        assert!((set.candidates[idx].length - min_len).abs() < 1e-9);
    }

    #[test]
    fn weight_scaling_preserves_the_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let lat = open_lattice(18, 18);
        let mut planner = Planner::for_lattice(&lat);
        for _ in 0..50 {
            let ax = rng.gen_range(1..17);
            let ay = rng.gen_range(1..17);
            let gx = rng.gen_range(1..17);
            let gy = rng.gen_range(1..17);
            let anchor = LatticeNode { x: ax, y: ay, heading: rng.gen_range(0..8) };
            let goal = lat.map().cell_center(gx, gy);
            let h = HeuristicTable::build(&lat, (gx, gy));
            let q = PlanQuery::new(lat.node_pose(anchor), goal, 1.0);
            let Ok(current) = planner.plan(&lat, &q, &h) else {
                continue;
            };
            let set =
                candidate_paths(&lat, &mut planner, &h, anchor, &current, &[], goal, 2.0, 0.45);
            let neighbors: Vec<NeighborState> = (0..rng.gen_range(0..5))
                .map(|_| NeighborState {
                    pos: Vec2::new(rng.gen_range(0.0..18.0), rng.gen_range(0.0..18.0)),
                    vel: Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    radius: 0.45,
                })
                .collect();
            let base = CongestionWeights::default();
            let pick = conflict_resolution(&set, &neighbors, &base, 0.45, 1.0, 0.1);
            for lambda in [0.1, 3.0, 10.0] {
                let scaled = CongestionWeights {
                    k_c: base.k_c * lambda,
                    k_g: base.k_g * lambda,
                    k_n: base.k_n * lambda,
                    ..base.clone()
                };
                let pick2 = conflict_resolution(&set, &neighbors, &scaled, 0.45, 1.0, 0.1);
                assert_eq!(pick, pick2, "lambda {lambda}");
            }
        }
    }

    #[test]
    fn head_on_straight_costs_more_than_sidestep() {
        // Two symmetric agents approaching head-on: the straight-through
        // candidate predicts a collision, a sidestep does not.
        let lat = open_lattice(20, 9);
        let mut planner = Planner::for_lattice(&lat);
        let anchor = LatticeNode { x: 4, y: 4, heading: 0 };
        let goal = lat.map().cell_center(16, 4);
        let h = HeuristicTable::build(&lat, (16, 4));
        let q = PlanQuery::new(lat.node_pose(anchor), goal, 1.0);
        let current = planner.plan(&lat, &q, &h).unwrap();
        let set = candidate_paths(&lat, &mut planner, &h, anchor, &current, &[], goal, 2.0, 0.45);
        let w = CongestionWeights::default();
        // Oncoming neighbor in the middle of the straight route.
        let nb = NeighborState {
            pos: Vec2::new(10.5, 4.5),
            vel: Vec2::new(-1.0, 0.0),
            radius: 0.45,
        };
        let lengths: Vec<f64> = set.candidates.iter().map(|c| c.length).collect();
        let straight = collision_cost(&set.candidates[0].wps, &[nb], 0.45, 1.0, &w);
        assert!(straight > 0.0, "straight-through must predict the collision");
        // Find a candidate that dodges: collision cost zero.
        let dodge = (0..set.candidates.len())
            .find(|&i| collision_cost(&set.candidates[i].wps, &[nb], 0.45, 1.0, &w) == 0.0);
        let dodge = dodge.expect("some sidestep candidate avoids the prediction");
        let c_straight = congestion(&set, 0, &[nb], &w, 0.45, 1.0, 0.1);
        let c_dodge = congestion(&set, dodge, &[nb], &w, 0.45, 1.0, 0.1);
        assert!(
            c_straight > c_dodge,
            "straight {c_straight} should exceed dodge {c_dodge}; lengths {lengths:?}"
        );
    }
}
