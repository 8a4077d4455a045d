//! Occupancy grids, map files, and base costmaps.
//!
//! Cell `(x, y)` covers the world square
//! `[origin.x + x*res, origin.x + (x+1)*res) x [origin.y + y*res, origin.y + (y+1)*res)`.
//! Image files store the top row first, so image row `r` holds grid row
//! `height - 1 - r`.

use crate::geometry::Vec2;
use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_OCCUPIED_THRESHOLD: u8 = 128;

/// Cost used for non-traversable cells.
pub const LETHAL: f64 = f64::INFINITY;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid dimensions must be positive (got {width}x{height}, resolution {resolution})")]
    InvalidDimensions { width: usize, height: usize, resolution: f64 },
    #[error("cell buffer has {got} entries, expected {expected}")]
    CellCount { expected: usize, got: usize },
    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("map file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("map image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("map metadata {path}: {message}")]
    Metadata { path: PathBuf, message: String },
    #[error("run-length map encoding: {0}")]
    Encoding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Free,
    Occupied,
}

/// Static world layout. Immutable once built; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Vec2,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// All-free grid.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Vec2) -> Result<Self, GridError> {
        Self::from_cells(width, height, resolution, origin, vec![false; width * height])
    }

    /// `occupied` is row-major with row 0 at the grid origin.
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        occupied: Vec<bool>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 || !resolution.is_finite() || resolution <= 0.0 {
            return Err(GridError::InvalidDimensions { width, height, resolution });
        }
        if occupied.len() != width * height {
            return Err(GridError::CellCount { expected: width * height, got: occupied.len() });
        }
        Ok(Self { width, height, resolution, origin, occupied })
    }

    /// Builds a grid from ASCII rows (`#` occupied, anything else free).
    /// The first string is the top row.
    pub fn from_ascii(rows: &[&str], resolution: f64, origin: Vec2) -> Result<Self, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut occupied = vec![false; width * height];
        for (r, row) in rows.iter().enumerate() {
            let y = height - 1 - r;
            for (x, ch) in row.chars().enumerate().take(width) {
                occupied[y * width + x] = ch == '#';
            }
        }
        Self::from_cells(width, height, resolution, origin, occupied)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn state(&self, cell: Cell) -> CellState {
        if self.occupied[self.index(cell)] {
            CellState::Occupied
        } else {
            CellState::Free
        }
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied[self.index(cell)]
    }

    /// Occupied test for signed indices; anything outside the grid counts as occupied.
    pub fn is_occupied_i(&self, x: i64, y: i64) -> bool {
        !self.contains(x, y) || self.occupied[y as usize * self.width + x as usize]
    }

    pub fn occupied_cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn set(&mut self, cell: Cell, state: CellState) {
        let i = self.index(cell);
        self.occupied[i] = state == CellState::Occupied;
    }

    /// Signed cell coordinates of a world point (may lie outside the grid).
    pub fn world_to_cell_unchecked(&self, point: Vec2) -> (i64, i64) {
        let rel = (point - self.origin) / self.resolution;
        (rel.x.floor() as i64, rel.y.floor() as i64)
    }

    pub fn world_to_cell(&self, point: Vec2) -> Result<Cell, GridError> {
        let (x, y) = self.world_to_cell_unchecked(point);
        if self.contains(x, y) {
            Ok(Cell::new(x as usize, y as usize))
        } else {
            Err(GridError::OutOfBounds { x: point.x, y: point.y })
        }
    }

    /// World coordinates of a cell center.
    pub fn cell_to_world(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            self.origin.x + (cell.x as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.y as f64 + 0.5) * self.resolution,
        )
    }

    /// Occupied at a world point; out-of-grid points are occupied.
    pub fn is_occupied_at(&self, point: Vec2) -> bool {
        let (x, y) = self.world_to_cell_unchecked(point);
        self.is_occupied_i(x, y)
    }

    /// True when a disc overlaps any occupied cell or leaves the grid.
    pub fn disc_collides(&self, center: Vec2, radius: f64) -> bool {
        let res = self.resolution;
        let (x0, y0) = self.world_to_cell_unchecked(center - Vec2::new(radius, radius));
        let (x1, y1) = self.world_to_cell_unchecked(center + Vec2::new(radius, radius));
        let r_sq = radius * radius;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !self.is_occupied_i(x, y) {
                    continue;
                }
                let min = self.origin + Vec2::new(x as f64 * res, y as f64 * res);
                let nearest = Vec2::new(
                    center.x.clamp(min.x, min.x + res),
                    center.y.clamp(min.y, min.y + res),
                );
                if (nearest - center).norm_sq() < r_sq {
                    return true;
                }
            }
        }
        false
    }

    /// 4-connected neighbours inside the grid.
    pub fn neighbors4(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let (x, y) = (cell.x as i64 + dx, cell.y as i64 + dy);
            self.contains(x, y).then(|| Cell::new(x as usize, y as usize))
        })
    }

    /// Run-length encoding of the occupied mask: alternating run lengths,
    /// starting with a (possibly empty) free run, in row-major order.
    pub fn to_rle(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0usize;
        for &occ in &self.occupied {
            if occ == current {
                count += 1;
            } else {
                runs.push(count);
                current = occ;
                count = 1;
            }
        }
        runs.push(count);
        runs
    }

    pub fn from_rle(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        runs: &[usize],
    ) -> Result<Self, GridError> {
        let mut occupied = Vec::with_capacity(width * height);
        let mut value = false;
        for &run in runs {
            if occupied.len() + run > width * height {
                return Err(GridError::Encoding("runs exceed grid size".into()));
            }
            occupied.extend(std::iter::repeat_n(value, run));
            value = !value;
        }
        if occupied.len() != width * height {
            return Err(GridError::Encoding(format!(
                "runs cover {} cells, grid has {}",
                occupied.len(),
                width * height
            )));
        }
        Self::from_cells(width, height, resolution, origin, occupied)
    }
}

/// Metadata stored next to a map image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMetadata {
    pub resolution: f64,
    pub origin: Vec2,
    pub occupied_threshold: u8,
}

impl MapMetadata {
    pub fn parse(text: &str, path: &Path) -> Result<Self, GridError> {
        let err = |message: String| GridError::Metadata { path: path.to_path_buf(), message };
        let mut resolution = None;
        let mut origin_x = None;
        let mut origin_y = None;
        let mut threshold = DEFAULT_OCCUPIED_THRESHOLD;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| err(format!("line {}: expected `key: value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let number = || -> Result<f64, GridError> {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("line {}: `{key}` is not a finite number", lineno + 1)))
            };
            match key {
                "resolution" => resolution = Some(number()?),
                "origin_x" => origin_x = Some(number()?),
                "origin_y" => origin_y = Some(number()?),
                "occupied_threshold" => {
                    threshold = value
                        .parse::<u8>()
                        .map_err(|_| err(format!("line {}: `occupied_threshold` must be 0..=255", lineno + 1)))?
                }
                other => return Err(err(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        let resolution = resolution.ok_or_else(|| err("missing key `resolution`".into()))?;
        if resolution <= 0.0 {
            return Err(err("`resolution` must be positive".into()));
        }
        Ok(Self {
            resolution,
            origin: Vec2::new(
                origin_x.ok_or_else(|| err("missing key `origin_x`".into()))?,
                origin_y.ok_or_else(|| err("missing key `origin_y`".into()))?,
            ),
            occupied_threshold: threshold,
        })
    }

    pub fn render(&self) -> String {
        format!(
            "resolution: {}\norigin_x: {}\norigin_y: {}\noccupied_threshold: {}\n",
            self.resolution, self.origin.x, self.origin.y, self.occupied_threshold
        )
    }
}

/// Sidecar metadata path for a map image: same stem, `.meta` extension.
pub fn metadata_path(image: &Path) -> PathBuf {
    image.with_extension("meta")
}

/// Loads a grayscale PGM/PNG map plus its `.meta` sidecar.
pub fn load_map(path: impl AsRef<Path>) -> Result<OccupancyGrid, GridError> {
    let path = path.as_ref();
    let meta_path = metadata_path(path);
    let meta_text = fs::read_to_string(&meta_path)
        .map_err(|source| GridError::Io { path: meta_path.clone(), source })?;
    let meta = MapMetadata::parse(&meta_text, &meta_path)?;
    let bytes = fs::read(path).map_err(|source| GridError::Io { path: path.to_path_buf(), source })?;
    let img = image::load_from_memory(&bytes)
        .map_err(|e| GridError::Image { path: path.to_path_buf(), message: e.to_string() })?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut occupied = vec![false; w * h];
    for (px, py, luma) in img.enumerate_pixels() {
        let y = h - 1 - py as usize;
        occupied[y * w + px as usize] = luma.0[0] < meta.occupied_threshold;
    }
    OccupancyGrid::from_cells(w, h, meta.resolution, meta.origin, occupied)
}

/// Binary PGM (P5) bytes: occupied = 0, free = 255.
pub fn encode_pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    for row in (0..grid.height).rev() {
        for x in 0..grid.width {
            out.push(if grid.occupied[row * grid.width + x] { 0 } else { 255 });
        }
    }
    out
}

/// Writes `path` (PGM) and its `.meta` sidecar.
pub fn save_map(grid: &OccupancyGrid, path: impl AsRef<Path>) -> Result<(), GridError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(grid)).map_err(|source| GridError::Io { path: path.to_path_buf(), source })?;
    let meta = MapMetadata {
        resolution: grid.resolution,
        origin: grid.origin,
        occupied_threshold: DEFAULT_OCCUPIED_THRESHOLD,
    };
    let meta_path = metadata_path(path);
    fs::write(&meta_path, meta.render()).map_err(|source| GridError::Io { path: meta_path, source })
}

/// Traversal costs over a grid. Free cells cost at least 1; lethal cells are `LETHAL`.
#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Vec2,
    cost: Vec<f64>,
}

impl Costmap {
    /// Uniform costmap; mainly for tests and synthetic planning problems.
    pub fn filled(width: usize, height: usize, resolution: f64, origin: Vec2, value: f64) -> Self {
        Self { width, height, resolution, origin, cost: vec![value; width * height] }
    }

    pub fn from_costs(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        cost: Vec<f64>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 || resolution.is_nan() || resolution <= 0.0 {
            return Err(GridError::InvalidDimensions { width, height, resolution });
        }
        if cost.len() != width * height {
            return Err(GridError::CellCount { expected: width * height, got: cost.len() });
        }
        Ok(Self { width, height, resolution, origin, cost })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn cost(&self, cell: Cell) -> f64 {
        self.cost[self.index(cell)]
    }

    pub fn set_cost(&mut self, cell: Cell, value: f64) {
        let i = self.index(cell);
        self.cost[i] = value;
    }

    pub fn is_lethal(&self, cell: Cell) -> bool {
        self.cost(cell) == LETHAL
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn world_to_cell(&self, point: Vec2) -> Result<Cell, GridError> {
        let rel = (point - self.origin) / self.resolution;
        let (x, y) = (rel.x.floor() as i64, rel.y.floor() as i64);
        if self.contains(x, y) {
            Ok(Cell::new(x as usize, y as usize))
        } else {
            Err(GridError::OutOfBounds { x: point.x, y: point.y })
        }
    }

    pub fn cell_to_world(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            self.origin.x + (cell.x as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn traversable_mask(&self) -> Vec<bool> {
        self.cost.iter().map(|&c| c != LETHAL).collect()
    }
}

/// Marks occupied cells and every cell whose center lies within `robot_radius`
/// of an occupied cell's center as lethal; everything else costs 1.
pub fn base_costmap(grid: &OccupancyGrid, robot_radius: f64) -> Costmap {
    let (w, h) = (grid.width, grid.height);
    let mut cost = vec![1.0; w * h];
    let reach = robot_radius.max(0.0) / grid.resolution;
    let reach_sq = reach * reach + 1e-9;
    let span = reach.floor() as i64;
    let mut offsets = Vec::new();
    for dy in -span..=span {
        for dx in -span..=span {
            if ((dx * dx + dy * dy) as f64) <= reach_sq {
                offsets.push((dx, dy));
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if !grid.occupied[y * w + x] {
                continue;
            }
            // Interior cells of a solid block add nothing new.
            let interior = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .all(|&(dx, dy)| grid.is_occupied_i(x as i64 + dx, y as i64 + dy));
            if interior {
                cost[y * w + x] = LETHAL;
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if grid.contains(nx, ny) {
                    cost[ny as usize * w + nx as usize] = LETHAL;
                }
            }
        }
    }
    Costmap { width: w, height: h, resolution: grid.resolution, origin: grid.origin, cost }
}

/// Labels 4-connected components of `mask`; `None` for cells outside the mask.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> (Vec<Option<u32>>, u32) {
    let mut labels = vec![None; mask.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if mask[j] && labels[j].is_none() {
                    labels[j] = Some(next);
                    queue.push_back(j);
                }
            };
            if x + 1 < width {
                visit(i + 1);
            }
            if x > 0 {
                visit(i - 1);
            }
            if y + 1 < height {
                visit(i + width);
            }
            if y > 0 {
                visit(i - width);
            }
        }
        next += 1;
    }
    (labels, next)
}

/// 4-connected BFS step counts from `start` over `mask`; `None` where unreachable.
pub fn bfs_steps(mask: &[bool], width: usize, height: usize, start: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; mask.len()];
    if !mask[start] {
        return dist;
    }
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let d = dist[i].unwrap_or(0) + 1;
        let (x, y) = (i % width, i / width);
        let mut visit = |j: usize| {
            if mask[j] && dist[j].is_none() {
                dist[j] = Some(d);
                queue.push_back(j);
            }
        };
        if x + 1 < width {
            visit(i + 1);
        }
        if x > 0 {
            visit(i - 1);
        }
        if y + 1 < height {
            visit(i + width);
        }
        if y > 0 {
            visit(i - width);
        }
    }
    dist
}

/// Euclidean distance (meters) from each cell center to the nearest occupied
/// cell center; grid borders count as occupied one cell outside the grid.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Vec2,
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn new(grid: &OccupancyGrid) -> Self {
        // Exact squared EDT (separable lower-envelope transform) over a padded grid.
        let (w, h) = (grid.width + 2, grid.height + 2);
        let inf = 1e20;
        let mut f = vec![inf; w * h];
        for y in 0..h {
            for x in 0..w {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                if border || grid.occupied[(y - 1) * grid.width + (x - 1)] {
                    f[y * w + x] = 0.0;
                }
            }
        }
        let mut buf = vec![0.0; w.max(h)];
        for x in 0..w {
            for y in 0..h {
                buf[y] = f[y * w + x];
            }
            let out = edt_1d(&buf[..h]);
            for y in 0..h {
                f[y * w + x] = out[y];
            }
        }
        for y in 0..h {
            let out = edt_1d(&f[y * w..(y + 1) * w]);
            f[y * w..(y + 1) * w].copy_from_slice(&out);
        }
        let mut dist = Vec::with_capacity(grid.len());
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                dist.push(f[y * w + x].sqrt() * grid.resolution);
            }
        }
        Self { width: grid.width, height: grid.height, resolution: grid.resolution, origin: grid.origin, dist }
    }

    /// Distance at the cell containing `point`; 0 outside the grid.
    pub fn at(&self, point: Vec2) -> f64 {
        let rel = (point - self.origin) / self.resolution;
        let (x, y) = (rel.x.floor() as i64, rel.y.floor() as i64);
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return 0.0;
        }
        self.dist[y as usize * self.width + x as usize]
    }
}

fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let intersect = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
    };
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *out = diff * diff + f[p];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(w, h, 0.1, Vec2::ZERO).unwrap()
    }

    #[test]
    fn world_to_cell_examples() {
        let g = unit_grid(10, 10);
        assert_eq!(g.world_to_cell(Vec2::new(0.25, 0.05)).unwrap(), Cell::new(2, 0));
        assert_eq!(g.world_to_cell(Vec2::ZERO).unwrap(), Cell::new(0, 0));
        assert!(matches!(g.world_to_cell(Vec2::new(-0.01, 0.0)), Err(GridError::OutOfBounds { .. })));
        assert!(g.world_to_cell(Vec2::new(1.0, 0.5)).is_err());
    }

    #[test]
    fn cell_round_trip_everywhere() {
        let g = OccupancyGrid::new(37, 23, 0.05, Vec2::new(-1.3, 2.7)).unwrap();
        for y in 0..g.height() {
            for x in 0..g.width() {
                let c = Cell::new(x, y);
                assert_eq!(g.world_to_cell(g.cell_to_world(c)).unwrap(), c);
            }
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(OccupancyGrid::new(0, 3, 0.1, Vec2::ZERO).is_err());
        assert!(OccupancyGrid::new(3, 3, 0.0, Vec2::ZERO).is_err());
        assert!(OccupancyGrid::from_cells(2, 2, 0.1, Vec2::ZERO, vec![false; 3]).is_err());
    }

    #[test]
    fn base_costmap_empty_and_single() {
        let g = unit_grid(6, 6);
        let cm = base_costmap(&g, 0.5);
        assert!(cm.costs().iter().all(|&c| c == 1.0));

        let mut g = unit_grid(6, 6);
        g.set(Cell::new(3, 3), CellState::Occupied);
        let cm = base_costmap(&g, 0.0);
        let lethal: Vec<_> = (0..cm.costs().len()).filter(|&i| cm.costs()[i] == LETHAL).collect();
        assert_eq!(lethal, vec![3 * 6 + 3]);
    }

    #[test]
    fn base_costmap_disc_matches_brute_force() {
        let mut g = unit_grid(11, 11);
        g.set(Cell::new(5, 5), CellState::Occupied);
        let cm = base_costmap(&g, 0.2);
        for y in 0..11i64 {
            for x in 0..11i64 {
                let d = (((x - 5) * (x - 5) + (y - 5) * (y - 5)) as f64).sqrt();
                let expect_lethal = d <= 2.0;
                assert_eq!(cm.is_lethal(Cell::new(x as usize, y as usize)), expect_lethal, "cell {x},{y}");
            }
        }
    }

    #[test]
    fn disc_collision_against_cells() {
        let g = OccupancyGrid::from_ascii(&["....", ".#..", "...."], 1.0, Vec2::ZERO).unwrap();
        // occupied cell covers [1,2]x[1,2]
        assert!(g.disc_collides(Vec2::new(2.4, 1.5), 0.5));
        assert!(!g.disc_collides(Vec2::new(2.6, 1.5), 0.5));
        assert!(g.disc_collides(Vec2::new(3.8, 1.5), 0.5), "leaving the grid collides");
    }

    #[test]
    fn rle_round_trip() {
        let g = OccupancyGrid::from_ascii(&["#..#", "##..", "...."], 0.1, Vec2::new(1.0, 2.0)).unwrap();
        let runs = g.to_rle();
        let back = OccupancyGrid::from_rle(4, 3, 0.1, Vec2::new(1.0, 2.0), &runs).unwrap();
        assert_eq!(back, g);
        assert!(OccupancyGrid::from_rle(4, 3, 0.1, Vec2::ZERO, &[5]).is_err());
    }

    #[test]
    fn distance_field_matches_brute_force() {
        let g = OccupancyGrid::from_ascii(
            &["........", "..#.....", "........", ".....#..", "........"],
            0.1,
            Vec2::ZERO,
        )
        .unwrap();
        let df = DistanceField::new(&g);
        for y in 0..g.height() as i64 {
            for x in 0..g.width() as i64 {
                let mut best = f64::INFINITY;
                for oy in -1..=g.height() as i64 {
                    for ox in -1..=g.width() as i64 {
                        if g.is_occupied_i(ox, oy) {
                            let d = (((ox - x).pow(2) + (oy - y).pow(2)) as f64).sqrt();
                            best = best.min(d);
                        }
                    }
                }
                let p = g.cell_to_world(Cell::new(x as usize, y as usize));
                assert!((df.at(p) - best * 0.1).abs() < 1e-9, "cell {x},{y}");
            }
        }
    }

    #[test]
    fn metadata_errors() {
        let p = Path::new("m.meta");
        assert!(MapMetadata::parse("resolution: 0.1\norigin_x: 0\n", p).is_err());
        assert!(MapMetadata::parse("resolution: abc\norigin_x: 0\norigin_y: 0\n", p).is_err());
        assert!(MapMetadata::parse("resolution: 0.1\norigin_x: 0\norigin_y: 0\ncolor: red\n", p).is_err());
        let m = MapMetadata::parse("# map\nresolution: 0.05\norigin_x: -1.5\norigin_y: 2\n", p).unwrap();
        assert_eq!(m.resolution, 0.05);
        assert_eq!(m.origin, Vec2::new(-1.5, 2.0));
        assert_eq!(m.occupied_threshold, 128);
    }
}
