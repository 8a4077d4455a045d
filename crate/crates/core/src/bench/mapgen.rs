//! Procedural indoor floor plans: BSP rooms, corridors, doorways and clutter.

use crate::geometry::Vec2;
use crate::gridmap::{connected_components, Cell, CellState, OccupancyGrid};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGenParams {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution: f64,
    /// Smallest room side; BSP stops splitting below twice this.
    pub min_room: f64,
    pub corridor_width: f64,
    pub wall_thickness: f64,
    /// Fraction of each room's interior covered by clutter, in [0, 1).
    pub clutter_density: f64,
    /// Clutter keeps this far from room walls so doorways stay open.
    pub clutter_margin: f64,
}

impl Default for MapGenParams {
    fn default() -> Self {
        Self {
            width_m: 20.0,
            height_m: 16.0,
            resolution: 0.1,
            min_room: 3.5,
            corridor_width: 1.2,
            wall_thickness: 0.2,
            clutter_density: 0.05,
            clutter_margin: 0.8,
        }
    }
}

impl MapGenParams {
    pub fn is_valid(&self) -> bool {
        let positive = [self.width_m, self.height_m, self.resolution, self.min_room, self.corridor_width, self.wall_thickness]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        positive
            && (0.0..1.0).contains(&self.clutter_density)
            && self.clutter_margin >= 0.0
            && self.corridor_width >= 1.0
            && self.width_m >= self.min_room
            && self.height_m >= self.min_room
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn center(&self) -> (usize, usize) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }
}

struct Builder<'a> {
    free: Vec<bool>,
    width: usize,
    height: usize,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn carve(&mut self, r: Rect) {
        for y in r.y..(r.y + r.h).min(self.height - 1) {
            for x in r.x..(r.x + r.w).min(self.width - 1) {
                if x >= 1 && y >= 1 {
                    self.free[y * self.width + x] = true;
                }
            }
        }
    }

    fn fill(&mut self, r: Rect) {
        for y in r.y..(r.y + r.h).min(self.height) {
            for x in r.x..(r.x + r.w).min(self.width) {
                self.free[y * self.width + x] = false;
            }
        }
    }

    /// Splits `area` recursively; returns the rooms carved inside it.
    fn split(&mut self, area: Rect, min_room: usize, wall: usize, corridor: usize) -> Vec<Rect> {
        let can_x = area.w >= 2 * min_room;
        let can_y = area.h >= 2 * min_room;
        if !can_x && !can_y {
            let shrink_w = self.rng.gen_range(0..=area.w.saturating_sub(min_room) / 3);
            let shrink_h = self.rng.gen_range(0..=area.h.saturating_sub(min_room) / 3);
            let room = Rect {
                x: area.x + wall + shrink_w / 2,
                y: area.y + wall + shrink_h / 2,
                w: area.w.saturating_sub(2 * wall + shrink_w).max(1),
                h: area.h.saturating_sub(2 * wall + shrink_h).max(1),
            };
            self.carve(room);
            return vec![room];
        }
        let vertical = if can_x && can_y { area.w >= area.h } else { can_x };
        let (a, b) = if vertical {
            let cut = self.rng.gen_range(min_room..=area.w - min_room);
            (Rect { w: cut, ..area }, Rect { x: area.x + cut, w: area.w - cut, ..area })
        } else {
            let cut = self.rng.gen_range(min_room..=area.h - min_room);
            (Rect { h: cut, ..area }, Rect { y: area.y + cut, h: area.h - cut, ..area })
        };
        let left = self.split(a, min_room, wall, corridor);
        let right = self.split(b, min_room, wall, corridor);
        let ra = left[self.rng.gen_range(0..left.len())];
        let rb = right[self.rng.gen_range(0..right.len())];
        self.corridor(ra.center(), rb.center(), corridor);
        left.into_iter().chain(right).collect()
    }

    /// L-shaped corridor of the given width between two cells.
    fn corridor(&mut self, from: (usize, usize), to: (usize, usize), width: usize) {
        let half = width / 2;
        let horizontal_first = self.rng.gen_bool(0.5);
        let corner = if horizontal_first { (to.0, from.1) } else { (from.0, to.1) };
        for (p, q) in [(from, corner), (corner, to)] {
            let x0 = p.0.min(q.0).saturating_sub(half);
            let y0 = p.1.min(q.1).saturating_sub(half);
            let x1 = p.0.max(q.0) + (width - half);
            let y1 = p.1.max(q.1) + (width - half);
            self.carve(Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 });
        }
    }

    fn clutter(&mut self, room: Rect, density: f64, margin: usize, res: f64) {
        if density <= 0.0 || room.w <= 2 * margin + 2 || room.h <= 2 * margin + 2 {
            return;
        }
        let inner = Rect { x: room.x + margin, y: room.y + margin, w: room.w - 2 * margin, h: room.h - 2 * margin };
        let target = (density * (room.w * room.h) as f64) as usize;
        let min_side = ((0.3 / res).round() as usize).max(1);
        let max_side = ((1.0 / res).round() as usize).max(min_side);
        let mut covered = 0;
        let mut tries = 0;
        while covered < target && tries < 200 {
            tries += 1;
            let w = self.rng.gen_range(min_side..=max_side).min(inner.w);
            let h = self.rng.gen_range(min_side..=max_side).min(inner.h);
            let x = inner.x + self.rng.gen_range(0..=inner.w - w);
            let y = inner.y + self.rng.gen_range(0..=inner.h - h);
            self.fill(Rect { x, y, w, h });
            covered += w * h;
        }
    }
}

/// Generates a floor plan whose free region is one 4-connected component.
pub fn generate_indoor_map(seed: u64, params: &MapGenParams) -> OccupancyGrid {
    assert!(params.is_valid(), "invalid map generation parameters: {params:?}");
    let res = params.resolution;
    let cells = |m: f64| ((m / res).round() as usize).max(1);
    let (width, height) = (cells(params.width_m), cells(params.height_m));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder { free: vec![false; width * height], width, height, rng: &mut rng };
    let wall = cells(params.wall_thickness);
    let area = Rect { x: 0, y: 0, w: width, h: height };
    let rooms = b.split(area, cells(params.min_room), wall, cells(params.corridor_width));
    let margin = cells(params.clutter_margin);
    for room in &rooms {
        b.clutter(*room, params.clutter_density, margin, res);
    }
    let mut free = b.free;
    // Keep only the largest free component.
    let (labels, count) = connected_components(&free, width, height);
    if count > 1 {
        let mut sizes = vec![0usize; count as usize];
        for l in labels.iter().flatten() {
            sizes[*l as usize] += 1;
        }
        let largest = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).unwrap() as u32;
        for (f, l) in free.iter_mut().zip(&labels) {
            if *l != Some(largest) {
                *f = false;
            }
        }
    }
    let mut grid = OccupancyGrid::new(width, height, res, Vec2::ZERO).expect("positive dimensions");
    for (i, f) in free.iter().enumerate() {
        let state = if *f { CellState::Free } else { CellState::Occupied };
        grid.set(Cell::new(i % width, i / width), state);
    }
    grid
}
