//! Arc-length waypoint sampling along a planned path.

use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SPACING: f64 = 0.5;
pub const DEFAULT_REACH: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoints {
    pub points: Vec<Vec2>,
    pub spacing: f64,
    pub cursor: usize,
}

impl Waypoints {
    pub fn goal(&self) -> Vec2 {
        *self.points.last().expect("waypoints are never empty")
    }

    pub fn current(&self) -> Vec2 {
        self.points[self.cursor.min(self.points.len() - 1)]
    }

    pub fn remaining(&self) -> &[Vec2] {
        &self.points[self.cursor.min(self.points.len() - 1)..]
    }

    /// Moves the cursor past waypoints the robot has reached (within `reach`)
    /// or overtaken along the path. The goal is only passed by reaching it.
    pub fn advance(&mut self, robot: Vec2, reach: f64) {
        let last = self.points.len() - 1;
        while self.cursor < last {
            let wp = self.points[self.cursor];
            let next = self.points[self.cursor + 1];
            let overtaken = (robot - wp).dot(next - wp) > 0.0;
            if robot.distance(wp) <= reach || overtaken {
                self.cursor += 1;
            } else {
                break;
            }
        }
    }

    pub fn path_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Samples `polyline` every `spacing` meters of arc length, starting at its
/// first point and always ending at its last. Paths shorter than `spacing`
/// reduce to the final point alone.
pub fn extract_waypoints(polyline: &[Vec2], spacing: f64) -> Waypoints {
    assert!(!polyline.is_empty(), "path must be nonempty");
    assert!(spacing > 0.0, "spacing must be positive");
    let goal = *polyline.last().unwrap();
    let total: f64 = polyline.windows(2).map(|w| w[0].distance(w[1])).sum();
    let eps = 1e-9;
    let mut points = Vec::new();
    if total >= spacing - eps {
        let mut next_mark = 0.0;
        let mut travelled = 0.0;
        for seg in polyline.windows(2) {
            let len = seg[0].distance(seg[1]);
            while next_mark <= travelled + len + eps && next_mark < total - eps {
                let t = if len > 0.0 { ((next_mark - travelled) / len).clamp(0.0, 1.0) } else { 0.0 };
                points.push(seg[0] + (seg[1] - seg[0]) * t);
                next_mark += spacing;
            }
            travelled += len;
        }
    }
    points.push(goal);
    Waypoints { points, spacing, cursor: 0 }
}
