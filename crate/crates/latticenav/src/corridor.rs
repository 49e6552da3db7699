//! Narrow-passage reservation table: each corridor carries one
//! (status, direction, start time, end time) record in a shared database and
//! admits traffic in a single direction per time window. Requests resolve by
//! the three-case rule: free or expired grants a new window, same-direction
//! extends the window, opposite-direction denies.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::GridMap;
use crate::planner::Waypoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::AToB => Direction::BToA,
            Direction::BToA => Direction::AToB,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::AToB => "a->b",
            Direction::BToA => "b->a",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub id: String,
    /// Ordered cell list from portal A to portal B.
    pub cells: Vec<(i32, i32)>,
    /// Metric length along the cell chain.
    pub length: f64,
}

impl Corridor {
    pub fn new(id: impl Into<String>, cells: Vec<(i32, i32)>, resolution: f64) -> Self {
        let length = cells
            .windows(2)
            .map(|w| {
                let dx = (w[1].0 - w[0].0) as f64;
                let dy = (w[1].1 - w[0].1) as f64;
                (dx * dx + dy * dy).sqrt() * resolution
            })
            .sum();
        Corridor {
            id: id.into(),
            cells,
            length,
        }
    }

    pub fn portal_a(&self) -> (i32, i32) {
        self.cells[0]
    }

    pub fn portal_b(&self) -> (i32, i32) {
        *self.cells.last().unwrap()
    }

    pub fn contains_cell(&self, cell: (i32, i32)) -> bool {
        self.cells.contains(&cell)
    }

    /// Index of a cell along the corridor, if it belongs to it.
    pub fn cell_index(&self, cell: (i32, i32)) -> Option<usize> {
        self.cells.iter().position(|&c| c == cell)
    }

    /// The `count` cells nearest the entry portal for the given travel
    /// direction; used as temporary obstacles after a denial.
    pub fn entry_cells(&self, direction: Direction, count: usize) -> Vec<(i32, i32)> {
        let n = count.min(self.cells.len());
        match direction {
            Direction::AToB => self.cells[..n].to_vec(),
            Direction::BToA => self.cells[self.cells.len() - n..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Free,
    Reserved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservationRecord {
    pub status: Status,
    pub direction: Option<Direction>,
    pub start_time: f64,
    pub end_time: f64,
}

impl ReservationRecord {
    fn free() -> Self {
        ReservationRecord {
            status: Status::Free,
            direction: None,
            start_time: 0.0,
            end_time: 0.0,
        }
    }

    fn valid(&self) -> bool {
        match self.status {
            Status::Free => self.direction.is_none(),
            Status::Reserved => self.direction.is_some() && self.end_time > self.start_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    GrantedNew,
    GrantedExtended,
    Denied,
}

impl Decision {
    pub fn granted(self) -> bool {
        !matches!(self, Decision::Denied)
    }

    pub fn label(self) -> &'static str {
        match self {
            Decision::GrantedNew => "granted_new",
            Decision::GrantedExtended => "granted_extended",
            Decision::Denied => "denied",
        }
    }
}

/// One audit-log entry per processed request.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservationEvent {
    pub time: f64,
    pub agent: u32,
    pub corridor: String,
    pub direction: Direction,
    pub decision: Decision,
    pub window: (f64, f64),
}

/// The only shared mutable state in the system. All mutations go through
/// `request`, processed serially in a total order chosen by the caller.
#[derive(Debug, Default)]
pub struct ReservationTable {
    records: BTreeMap<String, ReservationRecord>,
    events: Vec<ReservationEvent>,
}

impl ReservationTable {
    pub fn new(corridor_ids: impl IntoIterator<Item = String>) -> Self {
        ReservationTable {
            records: corridor_ids
                .into_iter()
                .map(|id| (id, ReservationRecord::free()))
                .collect(),
            events: Vec::new(),
        }
    }

    pub fn record(&self, id: &str) -> Option<&ReservationRecord> {
        self.records.get(id)
    }

    pub fn events(&self) -> &[ReservationEvent] {
        &self.events
    }

    /// Three-case request resolution. `eta` is the requesting agent's
    /// estimated arrival at the entry and `traverse` its traversal duration
    /// estimate; `now` decides whether an existing reservation has expired.
    pub fn request(
        &mut self,
        corridor: &str,
        direction: Direction,
        eta: f64,
        traverse: f64,
        now: f64,
        agent: u32,
    ) -> Result<Decision> {
        let rec = self
            .records
            .get_mut(corridor)
            .ok_or_else(|| Error::UnknownCorridor(corridor.to_string()))?;
        let expired = rec.status == Status::Reserved && now > rec.end_time;
        let decision = if rec.status == Status::Free || expired {
            *rec = ReservationRecord {
                status: Status::Reserved,
                direction: Some(direction),
                start_time: eta,
                end_time: eta + traverse,
            };
            Decision::GrantedNew
        } else if rec.direction == Some(direction) {
            rec.end_time = rec.end_time.max(eta + traverse);
            Decision::GrantedExtended
        } else {
            Decision::Denied
        };
        debug_assert!(rec.valid(), "reservation record invariant violated");
        self.events.push(ReservationEvent {
            time: now,
            agent,
            corridor: corridor.to_string(),
            direction,
            decision,
            window: (rec.start_time, rec.end_time),
        });
        Ok(decision)
    }
}

/// Where a waypoint track crosses a corridor: travel direction, waypoint
/// index of the entry, and cost-distance of entry/exit from the track start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traversal {
    pub direction: Direction,
    pub entry_wp: usize,
    pub entry_cum: f64,
    pub exit_cum: f64,
}

/// Find the first traversal of `corridor` along the waypoints, if any.
pub fn find_traversal(
    wps: &[Waypoint],
    map: &GridMap,
    corridor: &Corridor,
) -> Option<Traversal> {
    let mut entry: Option<(usize, usize)> = None;
    let mut last: Option<usize> = None;
    let mut exit_cum = 0.0;
    for (i, wp) in wps.iter().enumerate() {
        let cell = map.cell_of(wp.pos);
        if let Some(ci) = corridor.cell_index(cell) {
            if entry.is_none() {
                entry = Some((i, ci));
            }
            last = Some(ci);
            exit_cum = wp.cum;
        } else if entry.is_some() {
            break;
        }
    }
    let (entry_wp, first_ci) = entry?;
    let last_ci = last?;
    if first_ci == last_ci {
        return None;
    }
    let direction = if first_ci < last_ci {
        Direction::AToB
    } else {
        Direction::BToA
    };
    Some(Traversal {
        direction,
        entry_wp,
        entry_cum: wps[entry_wp].cum,
        exit_cum,
    })
}

/// Optional preprocessing: detect narrow passages (free cells whose
/// clearance admits only single-file traffic) and chain them into corridors.
/// Components that do not form simple paths are skipped; declared corridors
/// take precedence over detection.
pub fn detect_corridors(map: &GridMap, agent_radius: f64) -> Vec<Corridor> {
    let narrow_limit = 2.0 * (2.0 * agent_radius);
    let extent = |x: i32, y: i32, dx: i32, dy: i32| -> i32 {
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
    let mut narrow = vec![false; (map.width() * map.height()) as usize];
    for y in 0..map.height() {
        for x in 0..map.width() {
            if map.occupied(x, y) {
                continue;
            }
            // Passage width at a cell: the smaller of its free extents along
            // the two axes.
            let width_cells = extent(x, y, 1, 0).min(extent(x, y, 0, 1));
            if (width_cells as f64) * map.resolution() < narrow_limit {
                narrow[(y * map.width() + x) as usize] = true;
            }
        }
    }
    let idx = |x: i32, y: i32| (y * map.width() + x) as usize;
    let is_narrow = |x: i32, y: i32| map.in_bounds(x, y) && narrow[idx(x, y)];
    let mut seen = vec![false; narrow.len()];
    let mut corridors = Vec::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            if !is_narrow(x, y) || seen[idx(x, y)] {
                continue;
            }
            // Collect the 4-connected component.
            let mut comp = vec![(x, y)];
            seen[idx(x, y)] = true;
            let mut head = 0;
            while head < comp.len() {
                let (cx, cy) = comp[head];
                head += 1;
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if is_narrow(nx, ny) && !seen[idx(nx, ny)] {
                        seen[idx(nx, ny)] = true;
                        comp.push((nx, ny));
                    }
                }
            }
            if comp.len() < 2 {
                continue;
            }
            // Keep only simple chains: exactly two endpoints, others degree 2.
            let degree = |&(cx, cy): &(i32, i32)| {
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter(|(dx, dy)| comp.contains(&(cx + dx, cy + dy)))
                    .count()
            };
            let ends: Vec<(i32, i32)> = comp.iter().filter(|c| degree(c) == 1).cloned().collect();
            if ends.len() != 2 || comp.iter().any(|c| degree(c) > 2) {
                continue;
            }
            // Walk from the lexicographically smaller endpoint.
            let start = ends.iter().min().cloned().unwrap();
            let mut chain = vec![start];
            let mut prev = None;
            loop {
                let cur = *chain.last().unwrap();
                let next = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .map(|(dx, dy)| (cur.0 + dx, cur.1 + dy))
                    .find(|n| comp.contains(n) && Some(*n) != prev);
                match next {
                    Some(n) => {
                        prev = Some(cur);
                        chain.push(n);
                        if degree(&n) == 1 {
                            break;
                        }
                    }
                    None => break,
                }
            }
            let name = format!("auto{}", corridors.len());
            corridors.push(Corridor::new(name, chain, map.resolution()));
        }
    }
    corridors
}
