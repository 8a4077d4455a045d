//! 8-connected A* over a costmap.
//!
//! Entering a cell costs `step length (1 or sqrt 2, in cells) x cell cost`.
//! Edge weights are accumulated in fixed point (`COST_SCALE` units, rounded up)
//! so path totals are exact integers independent of summation order.

use crate::geometry::Vec2;
use crate::gridmap::{Cell, Costmap};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

pub const COST_SCALE: f64 = 1_000_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path between start and goal")]
    NoPath,
    #[error("{which} point ({x}, {y}) is out of bounds or lethal")]
    InvalidEndpoint { which: &'static str, x: f64, y: f64 },
}

/// Fixed-point weight of entering a cell with `cost` via a step of `length` cells.
pub fn edge_weight(length: f64, cost: f64) -> u64 {
    (length * cost * COST_SCALE).ceil() as u64
}

pub const NEIGHBORS8: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, std::f64::consts::SQRT_2),
    (1, -1, std::f64::consts::SQRT_2),
    (-1, 1, std::f64::consts::SQRT_2),
    (-1, -1, std::f64::consts::SQRT_2),
];

/// Cells reachable in one move from `cell`, with the move length. Diagonal
/// moves need both adjacent orthogonal cells to be traversable.
pub fn successors(costmap: &Costmap, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
    let traversable = move |x: i64, y: i64| {
        costmap.contains(x, y) && !costmap.is_lethal(Cell::new(x as usize, y as usize))
    };
    NEIGHBORS8.iter().filter_map(move |&(dx, dy, len)| {
        let (x, y) = (cell.x as i64 + dx, cell.y as i64 + dy);
        if !traversable(x, y) {
            return None;
        }
        if dx != 0 && dy != 0 && !(traversable(cell.x as i64 + dx, cell.y as i64) && traversable(cell.x as i64, cell.y as i64 + dy)) {
            return None;
        }
        Some((Cell::new(x as usize, y as usize), len))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// Total cost in `COST_SCALE` fixed-point units.
    pub total: u64,
}

impl GridPath {
    pub fn cost(&self) -> f64 {
        self.total as f64 / COST_SCALE
    }

    /// Geometric length in meters.
    pub fn length(&self, resolution: f64) -> f64 {
        self.cells
            .windows(2)
            .map(|w| {
                let dx = w[0].x as f64 - w[1].x as f64;
                let dy = w[0].y as f64 - w[1].y as f64;
                dx.hypot(dy)
            })
            .sum::<f64>()
            * resolution
    }
}

pub fn plan_astar(costmap: &Costmap, start: Vec2, goal: Vec2) -> Result<GridPath, PlanError> {
    let endpoint = |which: &'static str, p: Vec2| {
        costmap
            .world_to_cell(p)
            .ok()
            .filter(|&c| !costmap.is_lethal(c))
            .ok_or(PlanError::InvalidEndpoint { which, x: p.x, y: p.y })
    };
    let s = endpoint("start", start)?;
    let g = endpoint("goal", goal)?;
    plan_astar_cells(costmap, s, g)
}

pub fn plan_astar_cells(costmap: &Costmap, start: Cell, goal: Cell) -> Result<GridPath, PlanError> {
    for (which, c) in [("start", start), ("goal", goal)] {
        if !costmap.contains(c.x as i64, c.y as i64) || costmap.is_lethal(c) {
            let p = if costmap.contains(c.x as i64, c.y as i64) { costmap.cell_to_world(c) } else { Vec2::ZERO };
            return Err(PlanError::InvalidEndpoint { which, x: p.x, y: p.y });
        }
    }
    let n = costmap.width() * costmap.height();
    let heuristic = |c: Cell| -> u64 {
        let dx = c.x as f64 - goal.x as f64;
        let dy = c.y as f64 - goal.y as f64;
        // Rounded down and backed off one unit: never exceeds the true cost.
        ((dx.hypot(dy) * COST_SCALE).floor() as u64).saturating_sub(1)
    };
    let mut g_score = vec![u64::MAX; n];
    let mut parent = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    let start_i = costmap.index(start);
    let goal_i = costmap.index(goal);
    g_score[start_i] = 0;
    heap.push(Reverse((heuristic(start), Reverse(0u64), start_i)));

    while let Some(Reverse((_, Reverse(g), i))) = heap.pop() {
        if g > g_score[i] {
            continue;
        }
        if i == goal_i {
            let mut cells = vec![goal];
            let mut cur = i;
            while cur != start_i {
                cur = parent[cur] as usize;
                cells.push(costmap.cell_at(cur));
            }
            cells.reverse();
            return Ok(GridPath { cells, total: g });
        }
        let cell = costmap.cell_at(i);
        for (next, len) in successors(costmap, cell) {
            let j = costmap.index(next);
            let candidate = g + edge_weight(len, costmap.costs()[j]);
            if candidate < g_score[j] {
                g_score[j] = candidate;
                parent[j] = i as u32;
                heap.push(Reverse((candidate + heuristic(next), Reverse(candidate), j)));
            }
        }
    }
    Err(PlanError::NoPath)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::LETHAL;

    fn unit(w: usize, h: usize) -> Costmap {
        Costmap::filled(w, h, 1.0, Vec2::ZERO, 1.0)
    }

    #[test]
    fn start_equals_goal() {
        let cm = unit(5, 5);
        let p = plan_astar_cells(&cm, Cell::new(2, 2), Cell::new(2, 2)).unwrap();
        assert_eq!(p.cells, vec![Cell::new(2, 2)]);
        assert_eq!(p.total, 0);
    }

    #[test]
    fn diagonal_on_empty_grid() {
        let cm = unit(5, 5);
        let p = plan_astar_cells(&cm, Cell::new(0, 0), Cell::new(4, 4)).unwrap();
        assert_eq!(p.cells.len(), 5);
        assert!((p.cost() - 4.0 * std::f64::consts::SQRT_2).abs() < 1e-5);
    }

    #[test]
    fn blocked_goal_is_no_path() {
        let mut cm = unit(5, 5);
        for y in 0..5 {
            cm.set_cost(Cell::new(2, y), LETHAL);
        }
        assert_eq!(plan_astar_cells(&cm, Cell::new(0, 0), Cell::new(4, 4)), Err(PlanError::NoPath));
    }

    #[test]
    fn lethal_or_outside_endpoints_rejected() {
        let mut cm = unit(5, 5);
        cm.set_cost(Cell::new(4, 4), LETHAL);
        assert!(matches!(
            plan_astar(&cm, Vec2::new(0.5, 0.5), Vec2::new(4.5, 4.5)),
            Err(PlanError::InvalidEndpoint { which: "goal", .. })
        ));
        assert!(matches!(
            plan_astar(&cm, Vec2::new(-0.5, 0.5), Vec2::new(1.5, 1.5)),
            Err(PlanError::InvalidEndpoint { which: "start", .. })
        ));
    }

    #[test]
    fn no_corner_cutting() {
        let mut cm = unit(3, 3);
        cm.set_cost(Cell::new(1, 0), LETHAL);
        let succ: Vec<_> = successors(&cm, Cell::new(0, 0)).map(|(c, _)| c).collect();
        assert!(!succ.contains(&Cell::new(1, 1)));
        assert!(succ.contains(&Cell::new(0, 1)));
    }
}
