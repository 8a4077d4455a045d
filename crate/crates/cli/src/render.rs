//! PNG rendering of replay logs and costmap dumps.

use crowdnav::engine::replay::{CostmapDump, GridRecord, ReplayError, ReplayLog, COSTMAP_FORMAT, REPLAY_FORMAT};
use crowdnav::{OccupancyGrid, Vec2};
use image::codecs::png::PngEncoder;
use image::{Rgb, RgbImage};

use crate::CliError;

const FREE: Rgb<u8> = Rgb([246, 246, 246]);
const WALL: Rgb<u8> = Rgb([40, 40, 40]);
const INFLATED: Rgb<u8> = Rgb([150, 150, 150]);
const ROBOT: Rgb<u8> = Rgb([30, 90, 220]);
const GOAL: Rgb<u8> = Rgb([210, 30, 30]);
const WAYPOINT: Rgb<u8> = Rgb([0, 150, 60]);
const REPLANNED: Rgb<u8> = Rgb([120, 200, 140]);
const SHADE: [f64; 3] = [220.0, 30.0, 30.0];
const PEDESTRIANS: [Rgb<u8>; 8] = [
    Rgb([230, 120, 0]),
    Rgb([150, 60, 180]),
    Rgb([0, 160, 170]),
    Rgb([200, 60, 120]),
    Rgb([120, 110, 0]),
    Rgb([90, 60, 30]),
    Rgb([240, 90, 70]),
    Rgb([60, 60, 140]),
];
/// Alpha at the highest cost in a dump.
const MAX_ALPHA: f64 = 0.85;

/// Maps world coordinates to pixels, `scale` pixels per cell, y pointing up.
struct Canvas {
    img: RgbImage,
    origin: Vec2,
    resolution: f64,
    scale: u32,
}

impl Canvas {
    fn new(grid: &OccupancyGrid, scale: u32) -> Self {
        let (w, h) = (grid.width() as u32, grid.height() as u32);
        let mut img = RgbImage::from_pixel(w * scale, h * scale, FREE);
        for y in 0..h {
            for x in 0..w {
                if grid.is_occupied(crowdnav::Cell::new(x as usize, y as usize)) {
                    fill_cell(&mut img, x, h - 1 - y, scale, WALL);
                }
            }
        }
        Self { img, origin: grid.origin(), resolution: grid.resolution(), scale }
    }

    fn px(&self, p: Vec2) -> (f64, f64) {
        let k = self.scale as f64 / self.resolution;
        ((p.x - self.origin.x) * k, self.img.height() as f64 - (p.y - self.origin.y) * k)
    }

    fn meters(&self, m: f64) -> f64 {
        m * self.scale as f64 / self.resolution
    }

    fn put(&mut self, x: i64, y: i64, c: Rgb<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, c);
        }
    }

    fn disk(&mut self, center: Vec2, radius_px: f64, c: Rgb<u8>) {
        let (cx, cy) = self.px(center);
        let r = radius_px.max(1.0);
        for y in (cy - r).floor() as i64..=(cy + r).ceil() as i64 {
            for x in (cx - r).floor() as i64..=(cx + r).ceil() as i64 {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.put(x, y, c);
                }
            }
        }
    }

    fn ring(&mut self, center: Vec2, radius_px: f64, c: Rgb<u8>) {
        let (cx, cy) = self.px(center);
        let r = radius_px.max(2.0);
        for y in (cy - r - 1.0).floor() as i64..=(cy + r + 1.0).ceil() as i64 {
            for x in (cx - r - 1.0).floor() as i64..=(cx + r + 1.0).ceil() as i64 {
                let d = (x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy);
                if (d - r).abs() <= 0.75 {
                    self.put(x, y, c);
                }
            }
        }
    }

    fn line(&mut self, a: Vec2, b: Vec2, c: Rgb<u8>) {
        let (ax, ay) = self.px(a);
        let (bx, by) = self.px(b);
        let n = ((bx - ax).hypot(by - ay) * 2.0).ceil().max(1.0) as usize;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            self.put((ax + t * (bx - ax)).floor() as i64, (ay + t * (by - ay)).floor() as i64, c);
        }
    }

    fn polyline(&mut self, points: &[Vec2], c: Rgb<u8>) {
        for w in points.windows(2) {
            self.line(w[0], w[1], c);
        }
    }

    /// Filled disk with a heading tick.
    fn agent(&mut self, position: Vec2, heading: f64, radius_m: f64, c: Rgb<u8>) {
        self.disk(position, self.meters(radius_m), c);
        let tip = position + Vec2::from_angle(heading) * (2.0 * radius_m);
        self.line(position, tip, c);
    }

    fn markers(&mut self, points: &[[f64; 2]], c: Rgb<u8>) {
        let r = (self.scale as f64 * 0.6).max(1.0);
        for p in points {
            self.disk(Vec2::new(p[0], p[1]), r, c);
        }
    }

    fn encode(self) -> Vec<u8> {
        let mut out = Vec::new();
        self.img.write_with_encoder(PngEncoder::new(&mut out)).expect("PNG encoding into memory cannot fail");
        out
    }
}

fn fill_cell(img: &mut RgbImage, x: u32, row: u32, scale: u32, c: Rgb<u8>) {
    for dy in 0..scale {
        for dx in 0..scale {
            img.put_pixel(x * scale + dx, row * scale + dy, c);
        }
    }
}

fn blend(base: Rgb<u8>, alpha: f64) -> Rgb<u8> {
    let mix = |b: u8, s: f64| ((1.0 - alpha) * b as f64 + alpha * s).round() as u8;
    Rgb([mix(base.0[0], SHADE[0]), mix(base.0[1], SHADE[1]), mix(base.0[2], SHADE[2])])
}

fn grid_of(record: &GridRecord) -> Result<OccupancyGrid, CliError> {
    record.to_grid().map_err(|e| CliError::Failure(format!("bad grid: {e}")))
}

fn v(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

pub fn render_log(log: &ReplayLog, scale: u32) -> Result<Vec<u8>, CliError> {
    let h = &log.header;
    let grid = grid_of(&h.grid)?;
    let mut canvas = Canvas::new(&grid, scale);
    for s in &log.steps {
        if let Some(w) = &s.waypoints {
            canvas.markers(w, REPLANNED);
        }
    }
    canvas.markers(&h.waypoints, WAYPOINT);

    let ped_radius = h.config.crowd.radius;
    for (i, start) in h.scenario.pedestrian_starts.iter().enumerate() {
        let mut path = vec![*start];
        path.extend(log.steps.iter().filter_map(|s| s.pedestrians.get(i)).map(|p| Vec2::new(p[0], p[1])));
        let color = PEDESTRIANS[i % PEDESTRIANS.len()];
        canvas.polyline(&path, color);
        let heading = log.steps.last().and_then(|s| s.pedestrians.get(i)).map_or(0.0, |p| p[2]);
        canvas.agent(*path.last().expect("nonempty"), heading, ped_radius, color);
    }

    let start = h.scenario.robot_start;
    let mut path = vec![start.position()];
    path.extend(log.steps.iter().map(|s| Vec2::new(s.robot[0], s.robot[1])));
    canvas.polyline(&path, ROBOT);
    canvas.ring(start.position(), canvas.meters(h.config.robot_radius), ROBOT);
    canvas.ring(h.scenario.robot_goal, canvas.meters(h.config.goal_radius), GOAL);
    let heading = log.steps.last().map_or(start.theta, |s| s.robot[2]);
    canvas.agent(*path.last().expect("nonempty"), heading, h.config.robot_radius, ROBOT);
    Ok(canvas.encode())
}

pub fn render_costmap(dump: &CostmapDump, scale: u32) -> Result<Vec<u8>, CliError> {
    let grid = grid_of(&dump.grid)?;
    if dump.costs.len() != grid.len() {
        return Err(CliError::Failure(format!("costmap has {} cells, grid has {}", dump.costs.len(), grid.len())));
    }
    let mut canvas = Canvas::new(&grid, scale);
    let peak = dump.costs.iter().flatten().fold(1.0f64, |m, &c| m.max(c));
    let h = grid.height();
    for (i, cost) in dump.costs.iter().enumerate() {
        let cell = grid.cell_at(i);
        if grid.is_occupied(cell) {
            continue;
        }
        let row = (h - 1 - cell.y) as u32;
        let color = match cost {
            None => INFLATED,
            Some(c) if *c > 1.0 && peak > 1.0 => blend(FREE, MAX_ALPHA * (c - 1.0) / (peak - 1.0)),
            Some(_) => continue,
        };
        fill_cell(&mut canvas.img, cell.x as u32, row, scale, color);
    }
    canvas.markers(&dump.waypoints, WAYPOINT);
    for (i, p) in dump.pedestrians.iter().enumerate() {
        // Outline only, so the shading underneath stays readable.
        canvas.ring(Vec2::new(p[0], p[1]), canvas.meters(0.15), PEDESTRIANS[i % PEDESTRIANS.len()]);
        let pos = Vec2::new(p[0], p[1]);
        canvas.line(pos, pos + Vec2::from_angle(p[2]) * 0.3, PEDESTRIANS[i % PEDESTRIANS.len()]);
    }
    canvas.agent(v([dump.robot[0], dump.robot[1]]), dump.robot[2], 0.15, ROBOT);
    Ok(canvas.encode())
}

/// Renders a replay log or a costmap dump, told apart by the `format` field.
pub fn render(text: &str, scale: u32) -> Result<Vec<u8>, CliError> {
    let first = text.lines().next().unwrap_or("");
    let format = serde_json::from_str::<serde_json::Value>(first)
        .or_else(|_| serde_json::from_str::<serde_json::Value>(text))
        .ok()
        .and_then(|v| v.get("format").and_then(|f| f.as_str()).map(String::from));
    match format.as_deref() {
        Some(COSTMAP_FORMAT) => {
            let dump: CostmapDump =
                serde_json::from_str(text).map_err(|e| CliError::Failure(format!("bad costmap dump: {e}")))?;
            render_costmap(&dump, scale)
        }
        Some(REPLAY_FORMAT) | None => {
            let log = ReplayLog::parse(text).map_err(replay_failure)?;
            render_log(&log, scale)
        }
        Some(other) => Err(CliError::Failure(format!("unknown input format {other:?}"))),
    }
}

/// Parse errors name both the line and the step it holds.
pub fn replay_failure(e: ReplayError) -> CliError {
    match e {
        ReplayError::Parse { line, message } if line > 1 => {
            CliError::Failure(format!("parse error at step {} (line {line}): {message}", line - 1))
        }
        ReplayError::Parse { line, message } => CliError::Failure(format!("parse error in header (line {line}): {message}")),
        other => CliError::Failure(other.to_string()),
    }
}
