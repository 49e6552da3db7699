//! Buffered Voronoi cells: per-agent convex regions whose simultaneous
//! occupancy keeps disk agents collision-free. Each neighbor contributes one
//! half-plane, the bisector retracted toward the owner by the buffer radius.

use crate::geom::{clip_polygon, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    /// Unit normal pointing away from the owner (toward the neighbor).
    pub normal: Vec2,
    /// Points p with `normal . p <= offset` satisfy the constraint.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferedVoronoiCell {
    pub owner: Vec2,
    pub constraints: Vec<HalfPlane>,
}

/// Build the buffered Voronoi cell of an agent at `owner` with buffer
/// radius `radius` against the given neighbor positions.
///
/// Membership is equivalent to the inequality
/// `|p - p_j|^2 - |p - p_i|^2 >= 2 R |p_i - p_j|` for every neighbor j:
/// the bisector hyperplane shifted toward the owner by R. Coincident
/// neighbors get an arbitrary fixed normal; such cells exclude the owner
/// and callers are expected to hold in place.
pub fn compute_bvc(owner: Vec2, radius: f64, neighbors: &[Vec2]) -> BufferedVoronoiCell {
    let mut constraints = Vec::with_capacity(neighbors.len());
    for &nb in neighbors {
        let delta = nb - owner;
        let n = delta
            .normalized(1e-12)
            .unwrap_or_else(|| Vec2::new(1.0, 0.0));
        let midpoint = (owner + nb) * 0.5;
        constraints.push(HalfPlane {
            normal: n,
            offset: n.dot(midpoint) - radius,
        });
    }
    BufferedVoronoiCell { owner, constraints }
}

impl BufferedVoronoiCell {
    /// Boundary-inclusive membership test.
    pub fn contains(&self, p: Vec2) -> bool {
        self.constraints
            .iter()
            .all(|h| h.normal.dot(p) <= h.offset)
    }

    /// True iff the whole segment lies inside the cell. Sufficient to test
    /// the endpoints because the cell is convex.
    pub fn segment_inside(&self, a: Vec2, b: Vec2) -> bool {
        self.contains(a) && self.contains(b)
    }

    /// Clip the cell against a bounding box and return its polygon, for
    /// rendering. Empty if the cell has no area inside the box.
    pub fn polygon(&self, lo: Vec2, hi: Vec2) -> Vec<Vec2> {
        let mut poly = vec![
            lo,
            Vec2::new(hi.x, lo.y),
            hi,
            Vec2::new(lo.x, hi.y),
        ];
        for h in &self.constraints {
            poly = clip_polygon(&poly, h.normal, h.offset);
            if poly.is_empty() {
                break;
            }
        }
        poly
    }
}
