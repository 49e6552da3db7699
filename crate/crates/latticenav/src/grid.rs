//! Occupancy grid. Cell `(x, y)` covers the world rectangle
//! `[x*res, (x+1)*res] x [y*res, (y+1)*res]`; everything outside the map
//! bounds counts as obstacle.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: i32,
    height: i32,
    resolution: f64,
    occ: Vec<bool>,
}

impl GridMap {
    pub fn new(width: i32, height: i32, resolution: f64, occupied: &[(i32, i32)]) -> Result<Self> {
        if width <= 0 || height <= 0 {
            return Err(Error::InvalidParameter(
                "map dimensions must be positive".into(),
            ));
        }
        if resolution <= 0.0 {
            return Err(Error::InvalidParameter(
                "map resolution must be positive".into(),
            ));
        }
        let mut map = GridMap {
            width,
            height,
            resolution,
            occ: vec![false; (width * height) as usize],
        };
        for &(x, y) in occupied {
            if !map.in_bounds(x, y) {
                return Err(Error::Validation(format!(
                    "occupied cell ({x}, {y}) outside {width}x{height} map"
                )));
            }
            let idx = map.idx(x, y);
            map.occ[idx] = true;
        }
        Ok(map)
    }

    /// Parse an ASCII map: `.` free, `#` occupied. The first text row is the
    /// top of the map (highest y).
    pub fn from_ascii(text: &str, resolution: f64) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(Error::Parse("ascii map has no rows".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut occupied = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Parse(format!(
                    "ascii map row {} has {} cells, expected {}",
                    r + 1,
                    row.chars().count(),
                    width
                )));
            }
            for (c, ch) in row.chars().enumerate() {
                let y = (height - 1 - r) as i32;
                match ch {
                    '.' => {}
                    '#' => occupied.push((c as i32, y)),
                    other => {
                        return Err(Error::Parse(format!(
                            "ascii map row {} col {}: unexpected `{}`",
                            r + 1,
                            c + 1,
                            other
                        )))
                    }
                }
            }
        }
        GridMap::new(width as i32, height as i32, resolution, &occupied)
    }

    /// Render back to ASCII rows (top row first).
    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        for r in 0..self.height {
            let y = self.height - 1 - r;
            for x in 0..self.width {
                out.push(if self.occupied(x, y) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    fn idx(&self, x: i32, y: i32) -> usize {
        (y * self.width + x) as usize
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && x < self.width && y >= 0 && y < self.height
    }

    /// True if the cell is out of bounds or statically occupied.
    pub fn occupied(&self, x: i32, y: i32) -> bool {
        !self.in_bounds(x, y) || self.occ[self.idx(x, y)]
    }

    pub fn occupied_cells(&self) -> Vec<(i32, i32)> {
        let mut cells = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.occ[self.idx(x, y)] {
                    cells.push((x, y));
                }
            }
        }
        cells
    }

    pub fn cell_center(&self, x: i32, y: i32) -> Vec2 {
        Vec2::new(
            (x as f64 + 0.5) * self.resolution,
            (y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_of(&self, p: Vec2) -> (i32, i32) {
        (
            (p.x / self.resolution).floor() as i32,
            (p.y / self.resolution).floor() as i32,
        )
    }

    pub fn cell_rect(&self, x: i32, y: i32) -> Rect {
        Rect::new(
            Vec2::new(x as f64 * self.resolution, y as f64 * self.resolution),
            Vec2::new(
                (x + 1) as f64 * self.resolution,
                (y + 1) as f64 * self.resolution,
            ),
        )
    }

    fn world_size(&self) -> Vec2 {
        Vec2::new(
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    /// Distance from `p` to the outside of the map (0 if `p` is outside).
    pub fn dist_to_border(&self, p: Vec2) -> f64 {
        let s = self.world_size();
        p.x.min(s.x - p.x).min(p.y).min(s.y - p.y).max(0.0)
    }

    /// Exact distance from point `p` to the nearest obstacle (occupied cell
    /// rectangle or map border), capped at `cutoff` for efficiency.
    pub fn clearance(&self, p: Vec2, cutoff: f64) -> f64 {
        let mut best = self.dist_to_border(p).min(cutoff);
        if best == 0.0 {
            return 0.0;
        }
        let r = best;
        let (x0, y0) = self.cell_of(Vec2::new(p.x - r, p.y - r));
        let (x1, y1) = self.cell_of(Vec2::new(p.x + r, p.y + r));
        for y in y0.max(0)..=y1.min(self.height - 1) {
            for x in x0.max(0)..=x1.min(self.width - 1) {
                if self.occ[self.idx(x, y)] {
                    let d = self.cell_rect(x, y).dist_to_point(p);
                    if d < best {
                        best = d;
                    }
                }
            }
        }
        best
    }

    /// Per-cell-center distance to the nearest occupied cell center (map
    /// border handled analytically by callers). Used only as a conservative
    /// lower-bound accelerator for sweep collision checks.
    pub fn center_obstacle_dist(&self) -> Vec<f64> {
        let occupied = self.occupied_cells();
        let mut out = vec![f64::INFINITY; (self.width * self.height) as usize];
        if occupied.is_empty() {
            return out;
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let mut best = i64::MAX;
                for &(ox, oy) in &occupied {
                    let dx = (ox - x) as i64;
                    let dy = (oy - y) as i64;
                    let d2 = dx * dx + dy * dy;
                    if d2 < best {
                        best = d2;
                    }
                }
                out[self.idx(x, y)] = (best as f64).sqrt() * self.resolution;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_roundtrip() {
        let text = "####\n#..#\n####\n";
        let map = GridMap::from_ascii(text, 1.0).unwrap();
        assert_eq!(map.width(), 4);
        assert_eq!(map.height(), 3);
        assert!(map.occupied(0, 0));
        assert!(!map.occupied(1, 1));
        assert_eq!(map.to_ascii(), text);
    }

    #[test]
    fn ascii_rejects_ragged_rows() {
        assert!(GridMap::from_ascii("##\n###\n", 1.0).is_err());
    }

    #[test]
    fn out_of_bounds_is_occupied() {
        let map = GridMap::new(2, 2, 1.0, &[]).unwrap();
        assert!(map.occupied(-1, 0));
        assert!(map.occupied(0, 2));
    }

    #[test]
    fn clearance_matches_hand_values() {
        let map = GridMap::new(5, 5, 1.0, &[(2, 2)]).unwrap();
        // Center of cell (0, 2): obstacle rect spans [2,3]x[2,3].
        let d = map.clearance(map.cell_center(0, 2), 10.0);
        assert!((d - 0.5).abs() < 1e-12, "border at x=0 dominates: {d}");
        let d = map.clearance(Vec2::new(1.5, 2.5), 10.0);
        assert!((d - 0.5).abs() < 1e-12);
        // Cutoff respected.
        let d = map.clearance(Vec2::new(2.5, 2.5), 10.0);
        assert_eq!(d, 0.0, "inside the obstacle");
    }
}
