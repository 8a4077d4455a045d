//! Wall segments extracted from occupied-cell boundaries, with a tile index
//! for range queries.

use crate::geometry::{point_segment_closest, Vec2};
use crate::gridmap::OccupancyGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSegment {
    pub a: Vec2,
    pub b: Vec2,
}

/// Boundary edges between free and occupied cells (the grid border counts as
/// occupied), merged into maximal axis-aligned runs.
pub fn extract_wall_segments(grid: &OccupancyGrid) -> Vec<WallSegment> {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let res = grid.resolution();
    let o = grid.origin();
    let mut segments = Vec::new();

    // Horizontal edges lie on y = k * res, between rows k-1 and k.
    for k in 0..=h {
        let mut run_start: Option<i64> = None;
        for x in 0..=w {
            let boundary = x < w && {
                let below = grid.is_occupied_i(x, k - 1);
                let above = grid.is_occupied_i(x, k);
                below != above
            };
            match (boundary, run_start) {
                (true, None) => run_start = Some(x),
                (false, Some(s)) => {
                    let y = o.y + k as f64 * res;
                    segments.push(WallSegment {
                        a: Vec2::new(o.x + s as f64 * res, y),
                        b: Vec2::new(o.x + x as f64 * res, y),
                    });
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    // Vertical edges lie on x = k * res, between columns k-1 and k.
    for k in 0..=w {
        let mut run_start: Option<i64> = None;
        for y in 0..=h {
            let boundary = y < h && grid.is_occupied_i(k - 1, y) != grid.is_occupied_i(k, y);
            match (boundary, run_start) {
                (true, None) => run_start = Some(y),
                (false, Some(s)) => {
                    let x = o.x + k as f64 * res;
                    segments.push(WallSegment {
                        a: Vec2::new(x, o.y + s as f64 * res),
                        b: Vec2::new(x, o.y + y as f64 * res),
                    });
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    segments
}

/// Segments bucketed into square tiles.
#[derive(Debug, Clone)]
pub struct WallIndex {
    segments: Vec<WallSegment>,
    origin: Vec2,
    tile: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl WallIndex {
    pub fn new(grid: &OccupancyGrid, tile: f64) -> Self {
        let segments = extract_wall_segments(grid);
        let origin = grid.origin() - Vec2::new(tile, tile);
        let extent = Vec2::new(grid.width() as f64, grid.height() as f64) * grid.resolution();
        let cols = ((extent.x + 2.0 * tile) / tile).ceil() as usize + 1;
        let rows = ((extent.y + 2.0 * tile) / tile).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (id, s) in segments.iter().enumerate() {
            let (c0, r0) = tile_of(origin, tile, Vec2::new(s.a.x.min(s.b.x), s.a.y.min(s.b.y)));
            let (c1, r1) = tile_of(origin, tile, Vec2::new(s.a.x.max(s.b.x), s.a.y.max(s.b.y)));
            for r in r0.max(0)..=r1.min(rows as i64 - 1) {
                for c in c0.max(0)..=c1.min(cols as i64 - 1) {
                    buckets[r as usize * cols + c as usize].push(id as u32);
                }
            }
        }
        Self { segments, origin, tile, cols, rows, buckets }
    }

    pub fn segments(&self) -> &[WallSegment] {
        &self.segments
    }

    /// Segments within `range` of `p`, in ascending index order.
    pub fn query(&self, p: Vec2, range: f64) -> Vec<WallSegment> {
        let (c0, r0) = tile_of(self.origin, self.tile, p - Vec2::new(range, range));
        let (c1, r1) = tile_of(self.origin, self.tile, p + Vec2::new(range, range));
        let mut ids: Vec<u32> = Vec::new();
        for r in r0.max(0)..=r1.min(self.rows as i64 - 1) {
            for c in c0.max(0)..=c1.min(self.cols as i64 - 1) {
                ids.extend_from_slice(&self.buckets[r as usize * self.cols + c as usize]);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|id| self.segments[id as usize])
            .filter(|s| point_segment_closest(p, s.a, s.b).0 <= range)
            .collect()
    }
}

fn tile_of(origin: Vec2, tile: f64, p: Vec2) -> (i64, i64) {
    let rel = (p - origin) / tile;
    (rel.x.floor() as i64, rel.y.floor() as i64)
}
